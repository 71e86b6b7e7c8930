//! Assessment criteria for a fitted state: Bethe free energy, modularity,
//! two-level map-equation codelength and the four leave-one-out prediction
//! errors.

use serde::{Deserialize, Serialize};

use crate::bp::{
    argmax, pair_overlaps, same_cluster_probability, EdgeFactor, EmResult, Marginals, Messages,
    ModelParams,
};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::partition::Partition;

/// Per-edge overlaps `s_ij` and edge partition functions
/// `Z^ij = d_i d_j [(omega_in - omega_out) s_ij + omega_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    pub overlaps: Vec<f64>,
    pub z: Vec<f64>,
}

impl PairStats {
    pub fn new(g: &Graph, msgs: &Messages, params: &ModelParams) -> Self {
        let overlaps = pair_overlaps(g, msgs);
        let z = g
            .edges()
            .iter()
            .zip(&overlaps)
            .map(|(&(i, j), &s)| {
                (g.degree(i) * g.degree(j)) as f64 * (params.coupling() * s + params.omega_out())
            })
            .collect();
        PairStats { overlaps, z }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Bethe free energy per vertex, `-(1/(beta N)) (sum_i ln Z^i - sum_E ln Z^ij - sum_nonE ln Z~^ij)`.
///
/// The non-edge part uses `ln Z~^ij ~ -d_i d_j [(omega_in - omega_out) s_ij + omega_out]`
/// with `s_ij` from the marginals, summed in O(N q + L q) from the field totals.
pub fn bethe_free_energy(g: &Graph, msgs: &Messages, marg: &Marginals, params: &ModelParams) -> Result<f64> {
    let beta = params.beta();
    if beta.abs() < 1e-14 {
        return Err(Error::Undefined("Bethe free energy at beta = 0"));
    }
    let q = msgs.q();
    let two_l = g.total_degree() as f64;
    let wo = params.omega_out();
    let coupling = params.coupling();
    let factor = EdgeFactor::new(beta);
    let theta = marg.theta();

    let mut site = 0.0;
    let mut field = vec![0.0; q];
    for i in 0..g.n() {
        let di = g.degree(i) as f64;
        for (f, t) in field.iter_mut().zip(theta) {
            *f = -di * (two_l * wo + coupling * t);
        }
        for e in g.out_edges(i) {
            let k = g.target(e);
            site += (g.degree(k) as f64 * di * wo).ln();
            let m = msgs.get(g.reverse(e));
            for (f, &p) in field.iter_mut().zip(m) {
                *f += factor.log(p);
            }
        }
        site += log_sum_exp(&field);
    }

    let stats = PairStats::new(g, msgs, params);
    let mut edge = 0.0;
    for &z in &stats.z {
        if !(z > 0.0) {
            return Err(Error::InvalidState(format!("edge partition function {z} is not positive")));
        }
        edge += z.ln();
    }

    // Sum over unordered non-edge pairs of d_i d_j s_ij and of d_i d_j, with
    // the degree-weighted label totals taken from the marginals themselves
    // (they differ from `theta` when the field is held fixed).
    let mut totals = vec![0.0; q];
    let mut self_sq = 0.0;
    let mut deg_sq = 0.0;
    for i in 0..g.n() {
        let d = g.degree(i) as f64;
        deg_sq += d * d;
        let row = marg.get(i);
        self_sq += d * d * row.iter().map(|p| p * p).sum::<f64>();
        for (t, p) in totals.iter_mut().zip(row) {
            *t += d * p;
        }
    }
    let theta_sq: f64 = totals.iter().map(|t| t * t).sum();
    let mut edge_overlap = 0.0;
    let mut edge_deg = 0.0;
    for &(i, j) in g.edges() {
        let dd = (g.degree(i) * g.degree(j)) as f64;
        edge_deg += dd;
        edge_overlap += dd * marg.get(i).iter().zip(marg.get(j)).map(|(a, b)| a * b).sum::<f64>();
    }
    let non_edge_overlap = (theta_sq - self_sq) / 2.0 - edge_overlap;
    let non_edge_deg = (two_l * two_l - deg_sq) / 2.0 - edge_deg;
    let non_edge = coupling * non_edge_overlap + wo * non_edge_deg;

    let f = -(site - edge + non_edge) / (beta * g.n() as f64);
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::NonFinite {
            context: "Bethe free energy",
        })
    }
}

/// Modularity `(1/2L) sum_{i<j} delta(c_i, c_j) [A_ij - alpha d_i d_j / 2L]`
/// of a hard partition.
pub fn modularity(g: &Graph, partition: &Partition, alpha: f64) -> f64 {
    let two_l = g.total_degree() as f64;
    let q = partition.q();
    let mut internal = vec![0.0; q];
    let mut deg_sum = vec![0.0; q];
    let mut deg_sq = vec![0.0; q];
    for i in 0..g.n() {
        let c = partition.label(i);
        let d = g.degree(i) as f64;
        deg_sum[c] += d;
        deg_sq[c] += d * d;
    }
    for &(i, j) in g.edges() {
        if partition.label(i) == partition.label(j) {
            internal[partition.label(i)] += 1.0;
        }
    }
    let mut acc = 0.0;
    for c in 0..q {
        acc += internal[c] - alpha * (deg_sum[c] * deg_sum[c] - deg_sq[c]) / (2.0 * two_l);
    }
    acc / two_l
}

/// Modularity of the argmax partition of `marg`.
pub fn retrieval_modularity(g: &Graph, marg: &Marginals, alpha: f64) -> f64 {
    let p = Partition::new(marg.argmax_labels(), marg.q()).expect("argmax labels are below q");
    modularity(g, &p, alpha)
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Two-level map-equation codelength in bits for the degree-proportional walk.
pub fn map_equation_mdl(g: &Graph, partition: &Partition) -> f64 {
    let two_l = g.total_degree() as f64;
    let q = partition.q();
    let mut exit = vec![0.0; q];
    let mut visit = vec![0.0; q];
    let mut node_entropy = 0.0;
    for i in 0..g.n() {
        let p = g.degree(i) as f64 / two_l;
        visit[partition.label(i)] += p;
        node_entropy += plogp(p);
    }
    for &(i, j) in g.edges() {
        let (a, b) = (partition.label(i), partition.label(j));
        if a != b {
            exit[a] += 1.0 / two_l;
            exit[b] += 1.0 / two_l;
        }
    }
    let total_exit: f64 = exit.iter().sum();
    let mut len = plogp(total_exit) - node_entropy;
    for m in 0..q {
        len += plogp(exit[m] + visit[m]) - 2.0 * plogp(exit[m]);
    }
    len.max(0.0)
}

/// `1 - (1/L) sum_E ln Z^ij`.
pub fn e_bayes(g: &Graph, stats: &PairStats) -> Result<f64> {
    let mut acc = 0.0;
    for &z in &stats.z {
        if !(z > 0.0) {
            return Err(Error::InvalidState(format!("edge partition function {z} is not positive")));
        }
        acc += z.ln();
    }
    Ok(1.0 - acc / g.m() as f64)
}

/// `1 - (1/L) sum_E [ln(d_i d_j) + w ln omega_in + (1 - w) ln omega_out]`
/// for per-edge same-cluster weights `w`.
fn weighted_log_error(g: &Graph, params: &ModelParams, weights: impl Iterator<Item = f64>) -> f64 {
    let (li, lo) = (params.omega_in().ln(), params.omega_out().ln());
    let mut acc = 0.0;
    for (&(i, j), w) in g.edges().iter().zip(weights) {
        acc += ((g.degree(i) * g.degree(j)) as f64).ln() + w * li + (1.0 - w) * lo;
    }
    1.0 - acc / g.m() as f64
}

/// Gibbs prediction error: the log edge likelihood averaged over the cavity pair distribution.
pub fn e_gibbs(g: &Graph, msgs: &Messages, params: &ModelParams) -> f64 {
    weighted_log_error(g, params, pair_overlaps(g, msgs).into_iter())
}

/// [`e_gibbs`] with every cavity message replaced by its argmax.
pub fn e_map(g: &Graph, msgs: &Messages, params: &ModelParams) -> f64 {
    let same = (0..g.m()).map(|k| {
        let e = g.forward_edge(k);
        f64::from(u8::from(argmax(msgs.get(e)) == argmax(msgs.get(g.reverse(e)))))
    });
    weighted_log_error(g, params, same)
}

/// Training error: the same average under the full pair posterior, which
/// includes the edge itself.
pub fn e_training(g: &Graph, stats: &PairStats, params: &ModelParams) -> Result<f64> {
    if stats.z.iter().any(|&z| !(z > 0.0)) {
        return Err(Error::InvalidState("edge partition function is not positive".into()));
    }
    Ok(weighted_log_error(
        g,
        params,
        stats.overlaps.iter().map(|&s| same_cluster_probability(params, s)),
    ))
}

/// Every criterion for one fitted `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaRecord {
    pub q_input: usize,
    pub q_effective: usize,
    pub bethe_f: Option<f64>,
    pub modularity: f64,
    pub mdl_two_level: f64,
    pub e_bayes: f64,
    pub e_gibbs: f64,
    pub e_map: f64,
    pub e_training: f64,
    pub alpha: f64,
    pub beta: f64,
    pub factorized: bool,
}

/// Scores a fitted state. Modularity is taken at `alpha = 1`.
pub fn evaluate(g: &Graph, fit: &EmResult) -> Result<CriteriaRecord> {
    let partition = Partition::new(fit.marginals.argmax_labels(), fit.q)?;
    let stats = PairStats::new(g, &fit.messages, &fit.params);
    Ok(CriteriaRecord {
        q_input: fit.q,
        q_effective: partition.effective_q(),
        bethe_f: fit.bethe_free_energy,
        modularity: modularity(g, &partition, 1.0),
        mdl_two_level: map_equation_mdl(g, &partition),
        e_bayes: e_bayes(g, &stats)?,
        e_gibbs: e_gibbs(g, &fit.messages, &fit.params),
        e_map: e_map(g, &fit.messages, &fit.params),
        e_training: e_training(g, &stats, &fit.params)?,
        alpha: fit.params.alpha(),
        beta: fit.params.beta(),
        factorized: fit.factorized,
    })
}
