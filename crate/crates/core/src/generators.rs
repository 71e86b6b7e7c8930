//! Planted-partition benchmark graphs.
//!
//! Both generators return a simple graph together with the planted
//! partition. Vertices are laid out block by block, so cluster `k` owns a
//! contiguous id range.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::partition::Partition;
use crate::rng::{self, Rng};

/// Standard stochastic block model with the two-value affinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub sizes: Vec<usize>,
    pub omega_in: f64,
    pub omega_out: f64,
}

impl SbmSpec {
    /// `q` clusters of (nearly) equal size; remainders go to the first clusters.
    pub fn equal(n: usize, q: usize, omega_in: f64, omega_out: f64) -> Result<Self> {
        let spec = SbmSpec {
            sizes: equal_sizes(n, q)?,
            omega_in,
            omega_out,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Equal clusters with probabilities set from a target average degree `c`
    /// and ratio `eps = omega_out / omega_in`, using
    /// `c = omega_in (n/q - 1) + omega_out n (q-1)/q`.
    pub fn with_average_degree(n: usize, q: usize, c: f64, eps: f64) -> Result<Self> {
        if !(c >= 0.0) || !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "average degree {c} and eps {eps} must be non-negative"
            )));
        }
        let (nf, qf) = (n as f64, q.max(1) as f64);
        let denom = (nf / qf - 1.0) + eps * nf * (qf - 1.0) / qf;
        if denom <= 0.0 {
            return Err(Error::InvalidArgument(
                "cluster sizes too small to reach a positive average degree".into(),
            ));
        }
        let omega_in = c / denom;
        Self::equal(n, q, omega_in, eps * omega_in)
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn q(&self) -> usize {
        self.sizes.len()
    }

    /// `omega_out / omega_in`, when `omega_in > 0`.
    pub fn epsilon(&self) -> Option<f64> {
        (self.omega_in > 0.0).then(|| self.omega_out / self.omega_in)
    }

    pub fn validate(&self) -> Result<()> {
        check_prob(self.omega_in, "omega_in")?;
        check_prob(self.omega_out, "omega_out")?;
        if self.sizes.is_empty() {
            return Err(Error::InvalidArgument("at least one cluster is required".into()));
        }
        Ok(())
    }

    /// Analytic mean and variance of the edge count.
    pub fn edge_count_moments(&self) -> (f64, f64) {
        let mut mean = 0.0;
        let mut var = 0.0;
        for (a, &sa) in self.sizes.iter().enumerate() {
            for (b, &sb) in self.sizes.iter().enumerate().skip(a) {
                let (pairs, p) = if a == b {
                    ((sa * sa.saturating_sub(1) / 2) as f64, self.omega_in)
                } else {
                    ((sa * sb) as f64, self.omega_out)
                };
                mean += pairs * p;
                var += pairs * p * (1.0 - p);
            }
        }
        (mean, var)
    }
}

/// Degree-corrected block model: pair `(i, j)` is joined with probability
/// `min(1, theta_i * omega * theta_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcSbmSpec {
    pub sizes: Vec<usize>,
    pub propensities: Vec<f64>,
    pub omega_in: f64,
    pub omega_out: f64,
}

impl DcSbmSpec {
    /// Equal clusters with affinities scaled so the expected average degree
    /// is `c` (ignoring clipping at probability 1), with
    /// `eps = omega_out / omega_in`.
    pub fn with_average_degree(q: usize, propensities: Vec<f64>, c: f64, eps: f64) -> Result<Self> {
        let n = propensities.len();
        let sizes = equal_sizes(n, q)?;
        if !(c > 0.0 && c.is_finite()) || !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "average degree {c} must be positive and eps {eps} non-negative"
            )));
        }
        let labels = block_labels(&sizes);
        let mut block_sum = vec![0.0; q];
        let mut block_sq = vec![0.0; q];
        for (t, &l) in propensities.iter().zip(&labels) {
            block_sum[l] += t;
            block_sq[l] += t * t;
        }
        let total: f64 = block_sum.iter().sum();
        let same: f64 = (0..q).map(|b| block_sum[b] * block_sum[b] - block_sq[b]).sum();
        let diff = total * total - block_sum.iter().map(|s| s * s).sum::<f64>();
        let denom = same + eps * diff;
        if !(denom > 0.0) {
            return Err(Error::InvalidArgument("propensities leave no possible edge".into()));
        }
        let omega_in = c * n as f64 / denom;
        let spec = DcSbmSpec {
            sizes,
            propensities,
            omega_in,
            omega_out: eps * omega_in,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::InvalidArgument("at least one cluster is required".into()));
        }
        if self.propensities.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "{} propensities for {} vertices",
                self.propensities.len(),
                self.n()
            )));
        }
        if let Some(bad) = self.propensities.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "propensity {bad} is negative or not finite"
            )));
        }
        for (w, name) in [(self.omega_in, "omega_in"), (self.omega_out, "omega_out")] {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} = {w} must be >= 0")));
            }
        }
        Ok(())
    }

    fn pair_probability(&self, i: usize, j: usize, same: bool) -> f64 {
        let w = if same { self.omega_in } else { self.omega_out };
        (self.propensities[i] * w * self.propensities[j]).min(1.0)
    }

    /// Analytic mean and variance of the edge count.
    pub fn edge_count_moments(&self) -> (f64, f64) {
        let labels = block_labels(&self.sizes);
        let n = self.n();
        let (mut mean, mut var) = (0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let p = self.pair_probability(i, j, labels[i] == labels[j]);
                mean += p;
                var += p * (1.0 - p);
            }
        }
        (mean, var)
    }
}

/// Draws `n` propensities from a continuous power law `p(x) ~ x^-exponent`
/// truncated to `[lo, hi]`.
pub fn power_law_propensities(n: usize, exponent: f64, lo: f64, hi: f64, seed: u64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidArgument(format!("bad cutoffs [{lo}, {hi}]")));
    }
    let mut r = rng::rng(seed);
    let one_minus = 1.0 - exponent;
    Ok((0..n)
        .map(|_| {
            let u: f64 = r.gen();
            if one_minus.abs() < 1e-12 {
                lo * (hi / lo).powf(u)
            } else {
                let a = lo.powf(one_minus);
                let b = hi.powf(one_minus);
                (a + u * (b - a)).powf(1.0 / one_minus)
            }
        })
        .collect())
}

fn check_prob(p: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

fn equal_sizes(n: usize, q: usize) -> Result<Vec<usize>> {
    if q == 0 || q > n.max(1) {
        return Err(Error::InvalidArgument(format!("cannot split {n} vertices into {q} clusters")));
    }
    Ok((0..q).map(|k| n / q + usize::from(k < n % q)).collect())
}

fn block_labels(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(k, &s)| std::iter::repeat_n(k, s))
        .collect()
}

/// Number of failures before the next success of a Bernoulli(p) sequence.
fn geometric_skip(r: &mut Rng, log_q: f64) -> u64 {
    let u: f64 = 1.0 - r.gen::<f64>();
    let s = (u.ln() / log_q).floor();
    if s >= u64::MAX as f64 {
        u64::MAX
    } else {
        s as u64
    }
}

/// Visits a Bernoulli(p) subset of `0..total` in increasing order.
fn bernoulli_positions(r: &mut Rng, total: u64, p: f64, mut visit: impl FnMut(u64)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(visit);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut pos = geometric_skip(r, log_q);
    while pos < total {
        visit(pos);
        pos = pos.saturating_add(1).saturating_add(geometric_skip(r, log_q));
    }
}

/// Samples a standard SBM graph. Deterministic in `seed`.
pub fn generate_sbm(spec: &SbmSpec, seed: u64) -> Result<(Graph, Partition)> {
    spec.validate()?;
    let mut r = rng::rng(seed);
    let starts: Vec<usize> = spec
        .sizes
        .iter()
        .scan(0, |acc, &s| {
            let st = *acc;
            *acc += s;
            Some(st)
        })
        .collect();
    let mut edges = Vec::new();
    for (a, &sa) in spec.sizes.iter().enumerate() {
        // Within block: upper triangle walked row by row.
        let base = starts[a];
        let total = (sa as u64) * (sa as u64).saturating_sub(1) / 2;
        let (mut row, mut row_start, mut row_len) = (0u64, 0u64, (sa as u64).saturating_sub(1));
        bernoulli_positions(&mut r, total, spec.omega_in, |pos| {
            while pos >= row_start + row_len {
                row_start += row_len;
                row += 1;
                row_len -= 1;
            }
            let col = row + 1 + (pos - row_start);
            edges.push((base + row as usize, base + col as usize));
        });
        for (b, &sb) in spec.sizes.iter().enumerate().skip(a + 1) {
            let (ba, bb) = (starts[a], starts[b]);
            bernoulli_positions(&mut r, (sa * sb) as u64, spec.omega_out, |pos| {
                let (i, j) = (pos / sb as u64, pos % sb as u64);
                edges.push((ba + i as usize, bb + j as usize));
            });
        }
    }
    let graph = Graph::from_edges(spec.n(), edges)?;
    let planted = Partition::new(block_labels(&spec.sizes), spec.q())?;
    Ok((graph, planted))
}

/// Samples a degree-corrected SBM graph with clipped Bernoulli pair draws.
pub fn generate_dcsbm(spec: &DcSbmSpec, seed: u64) -> Result<(Graph, Partition)> {
    spec.validate()?;
    let mut r = rng::rng(seed);
    let labels = block_labels(&spec.sizes);
    let n = spec.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = spec.pair_probability(i, j, labels[i] == labels[j]);
            if p > 0.0 && r.gen::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::from_edges(n, edges)?;
    let planted = Partition::new(labels, spec.sizes.len())?;
    Ok((graph, planted))
}
