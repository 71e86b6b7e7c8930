//! EM inference for the degree-corrected block model with the two-value
//! affinity `omega_in` / `omega_out`.
//!
//! The E step is belief propagation over cavity messages `psi^{i->j}`, with
//! the non-edge interactions collapsed into the mean field
//! `theta_s = sum_l d_l psi^l_s`. The M step updates the two affinities in
//! closed form. Everything is O(L q) per sweep.

mod critical;
mod em;
mod mstep;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub use critical::{beta_star, beta_zero, initial_beta};
pub use em::{em_fit, em_fit_single, EmConfig, EmResult, EmSummary};
pub use mstep::{m_step, pair_overlaps, MIN_OMEGA_RATIO};
pub use sweep::{
    bp_sweep, compute_marginals, converge, init_messages, marginals_with_field, run_bp, BpOptions,
    SweepOutcome,
};
pub(crate) use mstep::same_cluster_probability;
pub(crate) use sweep::EdgeFactor;

/// The restricted affinity. `alpha` and `beta` are always derived from the
/// two omegas and the graph scale `2L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    omega_in: f64,
    omega_out: f64,
    two_l: f64,
}

impl ModelParams {
    pub fn new(omega_in: f64, omega_out: f64, two_l: f64) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(omega_in) || !ok(omega_out) {
            return Err(Error::InvalidArgument(format!(
                "affinities must be positive and finite (omega_in = {omega_in}, omega_out = {omega_out})"
            )));
        }
        if !ok(two_l) {
            return Err(Error::InvalidArgument(format!("2L = {two_l} must be positive")));
        }
        Ok(ModelParams {
            omega_in,
            omega_out,
            two_l,
        })
    }

    /// Inverts `alpha = 2L (omega_in - omega_out) / beta`, `beta = ln(omega_in / omega_out)`.
    pub fn from_alpha_beta(alpha: f64, beta: f64, two_l: f64) -> Result<Self> {
        if !(alpha > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} must be positive and beta = {beta} finite"
            )));
        }
        // omega_out (e^beta - 1) = alpha beta / 2L
        let ratio = if beta.abs() < 1e-300 {
            1.0
        } else {
            beta / beta.exp_m1()
        };
        let omega_out = alpha / two_l * ratio;
        ModelParams::new(omega_out * beta.exp(), omega_out, two_l)
    }

    pub fn omega_in(&self) -> f64 {
        self.omega_in
    }

    pub fn omega_out(&self) -> f64 {
        self.omega_out
    }

    pub fn two_l(&self) -> f64 {
        self.two_l
    }

    /// Inverse temperature `ln(omega_in / omega_out)`.
    pub fn beta(&self) -> f64 {
        (self.omega_in / self.omega_out).ln()
    }

    /// Resolution `2L (omega_in - omega_out) / beta`; at `beta = 0` the limit `2L omega`.
    pub fn alpha(&self) -> f64 {
        let x = self.omega_in / self.omega_out - 1.0;
        let shape = if x.abs() < 1e-12 { 1.0 - x / 2.0 } else { x / x.ln_1p() };
        self.two_l * self.omega_out * shape
    }

    /// `omega_in - omega_out`, equal to `alpha beta / 2L`.
    pub fn coupling(&self) -> f64 {
        self.omega_in - self.omega_out
    }

    /// `omega` for a same-cluster (`true`) or cross-cluster pair.
    pub fn omega(&self, same: bool) -> f64 {
        if same {
            self.omega_in
        } else {
            self.omega_out
        }
    }

    pub fn record(&self) -> ParamsRecord {
        ParamsRecord {
            omega_in: self.omega_in,
            omega_out: self.omega_out,
            alpha: self.alpha(),
            beta: self.beta(),
        }
    }
}

/// Serialized view of [`ModelParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub omega_in: f64,
    pub omega_out: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Cavity messages, one length-`q` distribution per directed edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    q: usize,
    data: Vec<f64>,
}

impl Messages {
    pub fn uniform(g: &Graph, q: usize) -> Self {
        Messages {
            q,
            data: vec![1.0 / q as f64; g.num_directed() * q],
        }
    }

    /// Builds messages from per-edge vectors (normalizing each one).
    pub fn from_fn(g: &Graph, q: usize, mut f: impl FnMut(usize, &mut [f64])) -> Self {
        let mut data = vec![0.0; g.num_directed() * q];
        for (e, chunk) in data.chunks_mut(q).enumerate() {
            f(e, chunk);
            normalize(chunk);
        }
        Messages { q, data }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.q
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `psi^{i->j}` for directed edge `e = i -> j`.
    pub fn get(&self, e: usize) -> &[f64] {
        &self.data[e * self.q..(e + 1) * self.q]
    }

    pub fn get_mut(&mut self, e: usize) -> &mut [f64] {
        &mut self.data[e * self.q..(e + 1) * self.q]
    }

    /// Same messages with channel `s` moved to `perm[s]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for e in 0..self.len() {
            let src = self.get(e);
            let dst = out.get_mut(e);
            for (s, &p) in perm.iter().enumerate() {
                dst[p] = src[s];
            }
        }
        out
    }

    /// Each message replaced by a delta at its argmax (lowest index on ties).
    pub fn hardened(&self) -> Self {
        let mut out = self.clone();
        for e in 0..self.len() {
            let k = argmax(self.get(e));
            let m = out.get_mut(e);
            m.fill(0.0);
            m[k] = 1.0;
        }
        out
    }
}

/// Vertex marginals `psi^i` and the degree-weighted field `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    q: usize,
    psi: Vec<f64>,
    theta: Vec<f64>,
}

impl Marginals {
    pub fn uniform(g: &Graph, q: usize) -> Self {
        Marginals {
            q,
            psi: vec![1.0 / q as f64; g.n() * q],
            theta: vec![g.total_degree() as f64 / q as f64; q],
        }
    }

    pub(crate) fn from_parts(q: usize, psi: Vec<f64>, theta: Vec<f64>) -> Self {
        Marginals { q, psi, theta }
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn n(&self) -> usize {
        self.psi.len() / self.q
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.psi[i * self.q..(i + 1) * self.q]
    }

    pub(crate) fn get_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.psi[i * self.q..(i + 1) * self.q]
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Overrides the field; used with a frozen field in tree checks.
    pub fn set_theta(&mut self, theta: Vec<f64>) {
        assert_eq!(theta.len(), self.q);
        self.theta = theta;
    }

    pub(crate) fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Recomputes `theta_s = sum_i d_i psi^i_s` from the stored marginals.
    pub fn refresh_theta(&mut self, g: &Graph) {
        let mut theta = vec![0.0; self.q];
        for i in 0..g.n() {
            let d = g.degree(i) as f64;
            for (t, p) in theta.iter_mut().zip(self.get(i)) {
                *t += d * p;
            }
        }
        self.theta = theta;
    }

    /// Hard labels `argmax_s psi^i_s`, lowest index on ties.
    pub fn argmax_labels(&self) -> Vec<usize> {
        (0..self.n()).map(|i| argmax(self.get(i))).collect()
    }

    /// `max_i max_s |psi^i_s - 1/q|`.
    pub fn max_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / self.q as f64;
        self.psi.iter().map(|p| (p - u).abs()).fold(0.0, f64::max)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n() {
            for (s, &p) in perm.iter().enumerate() {
                out.psi[i * self.q + p] = self.psi[i * self.q + s];
            }
        }
        for (s, &p) in perm.iter().enumerate() {
            out.theta[p] = self.theta[s];
        }
        out
    }

    /// Rows of the marginal matrix, for serialization.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.psi.chunks(self.q).map(<[f64]>::to_vec).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let q = rows.first().map_or(0, Vec::len);
        if q == 0 || rows.iter().any(|r| r.len() != q) {
            return Err(Error::InvalidArgument("marginal rows must share a non-zero length".into()));
        }
        let psi: Vec<f64> = rows.iter().flatten().copied().collect();
        Ok(Marginals {
            q,
            theta: vec![0.0; q],
            psi,
        })
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (k, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = k;
        }
    }
    best
}

pub(crate) fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        v.iter_mut().for_each(|x| *x /= s);
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_beta_round_trip() {
        let p = ModelParams::new(0.02, 0.005, 400.0).unwrap();
        let back = ModelParams::from_alpha_beta(p.alpha(), p.beta(), 400.0).unwrap();
        assert!((back.omega_in() - 0.02).abs() < 1e-15);
        assert!((back.omega_out() - 0.005).abs() < 1e-15);
        assert!((p.alpha() * p.beta() / 400.0 - p.coupling()).abs() < 1e-15);
    }

    #[test]
    fn alpha_limit_at_equal_affinities() {
        let p = ModelParams::new(0.01, 0.01, 100.0).unwrap();
        assert_eq!(p.beta(), 0.0);
        assert!((p.alpha() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn params_reject_non_positive() {
        assert!(ModelParams::new(0.0, 0.1, 10.0).is_err());
        assert!(ModelParams::new(0.1, -0.1, 10.0).is_err());
        assert!(ModelParams::new(f64::NAN, 0.1, 10.0).is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.25, 0.25, 0.5, 0.5]), 2);
        assert_eq!(argmax(&[1.0 / 3.0; 3]), 0);
    }
}
