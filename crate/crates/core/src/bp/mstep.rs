use super::{Marginals, Messages, ModelParams};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Smallest allowed `omega_out / omega_in` (and its inverse); keeps both
/// affinities positive so `beta` stays finite.
pub const MIN_OMEGA_RATIO: f64 = 1e-10;

/// `s_ij = sum_s psi^{i->j}_s psi^{j->i}_s` for every undirected edge, in
/// the order of [`Graph::edges`].
pub fn pair_overlaps(g: &Graph, msgs: &Messages) -> Vec<f64> {
    (0..g.m())
        .map(|k| {
            let e = g.forward_edge(k);
            msgs.get(e)
                .iter()
                .zip(msgs.get(g.reverse(e)))
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Posterior probability that the endpoints of an edge share a cluster.
pub(crate) fn same_cluster_probability(params: &ModelParams, s: f64) -> f64 {
    let wi = params.omega_in();
    let wo = params.omega_out();
    wi * s / ((wi - wo) * s + wo)
}

/// Closed-form update of `omega_in` and `omega_out` from converged messages
/// and the current marginals.
pub fn m_step(g: &Graph, msgs: &Messages, marg: &Marginals, params: &ModelParams) -> Result<ModelParams> {
    let l = g.m() as f64;
    let two_l = g.total_degree() as f64;
    let t_sum: f64 = pair_overlaps(g, msgs)
        .into_iter()
        .map(|s| same_cluster_probability(params, s))
        .sum();
    let theta_sq: f64 = marg.theta().iter().map(|t| t * t).sum();
    let den_out = two_l * two_l - theta_sq;
    if !(theta_sq > 0.0) || !(den_out > 1e-12 * two_l * two_l) {
        return Err(Error::DegeneratePartition(format!(
            "sum of theta^2 = {theta_sq} leaves no room for cross-cluster pairs"
        )));
    }
    let mut omega_in = 2.0 * t_sum / theta_sq;
    let mut omega_out = 2.0 * (l - t_sum).max(0.0) / den_out;
    if !omega_in.is_finite() || !omega_out.is_finite() || omega_in.max(omega_out) <= 0.0 {
        return Err(Error::NonFinite { context: "M step" });
    }
    omega_out = omega_out.max(omega_in * MIN_OMEGA_RATIO);
    omega_in = omega_in.max(omega_out * MIN_OMEGA_RATIO);
    ModelParams::new(omega_in, omega_out, two_l)
}
