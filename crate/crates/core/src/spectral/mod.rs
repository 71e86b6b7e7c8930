//! Spectral estimates of the number of clusters: isolated eigenvalues of the
//! modularity matrix and of the non-backtracking companion matrix.

mod krylov;

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use krylov::{leading_eigenvalues, KrylovOptions, LinOp};

/// Largest graph for which the full modularity spectrum is computed densely.
pub const DENSE_SPECTRUM_LIMIT: usize = 5000;

/// Realness tolerance on non-backtracking eigenvalues, relative to `|lambda|`.
pub const REALNESS_TOL: f64 = 1e-6;

const EIG_TOL: f64 = 1e-11;
const MAX_RESTARTS: usize = 300;
const SOLVER_SEED: u64 = 0x5eed_0f_5bec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixKind {
    Modularity,
    NonBacktracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub matrix_kind: MatrixKind,
    /// Real parts of the computed leading eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Imaginary parts, aligned with `eigenvalues`.
    pub imaginary: Vec<f64>,
    pub band_edge: f64,
    /// True when the band edge is a model estimate rather than exact.
    pub band_edge_estimated: bool,
    pub q_star: usize,
    pub k_requested: usize,
    /// False when the eigensolver hit its restart cap before every
    /// eigenvalue outside the band converged.
    pub converged: bool,
}

/// `min(N/2, 2 * expected_q + 10)`, at least 1.
pub fn default_k(n: usize, expected_q: usize) -> usize {
    (n / 2).min(2 * expected_q + 10).max(1)
}

struct ModularityOp<'a> {
    g: &'a Graph,
    alpha: f64,
    degrees: Vec<f64>,
    two_l: f64,
}

impl LinOp for ModularityOp<'_> {
    fn dim(&self) -> usize {
        self.g.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let proj = if self.two_l > 0.0 {
            self.alpha * self.degrees.iter().zip(x).map(|(d, v)| d * v).sum::<f64>() / self.two_l
        } else {
            0.0
        };
        for i in 0..self.g.n() {
            let s: f64 = self.g.neighbors(i).iter().map(|&j| x[j]).sum();
            y[i] = s - proj * self.degrees[i];
        }
    }
}

/// The companion form `[[0, D - I], [-I, A]]` of the non-backtracking matrix.
struct NonBacktrackingOp<'a> {
    g: &'a Graph,
}

impl LinOp for NonBacktrackingOp<'_> {
    fn dim(&self) -> usize {
        2 * self.g.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.g.n();
        let (x1, x2) = x.split_at(n);
        let (y1, y2) = y.split_at_mut(n);
        for i in 0..n {
            y1[i] = (self.g.degree(i) as f64 - 1.0) * x2[i];
            let s: f64 = self.g.neighbors(i).iter().map(|&j| x2[j]).sum();
            y2[i] = s - x1[i];
        }
    }
}

/// Upper edge of the bulk of the modularity spectrum for a sparse graph with
/// this degree sequence.
///
/// The edge is the smallest `z` for which the self-consistency
/// `D = sum_i w_i / (z - (d_i - 1) D)`, `w_i = d_i / 2L`, has a positive
/// solution `D`. On a `k`-regular graph this is `2 sqrt(k - 1)`.
pub fn modularity_band_edge(g: &Graph) -> f64 {
    let two_l = g.total_degree() as f64;
    if two_l == 0.0 {
        return 0.0;
    }
    let terms: Vec<(f64, f64)> = g
        .degrees()
        .filter(|&d| d > 0)
        .map(|d| (d as f64 / two_l, d as f64 - 1.0))
        .collect();
    let kmax = terms.iter().map(|t| t.1).fold(0.0, f64::max);
    if kmax == 0.0 {
        return 0.0;
    }
    let g_at = |z: f64, delta: f64| -> f64 {
        terms.iter().map(|&(w, k1)| w / (z - k1 * delta)).sum::<f64>() - delta
    };
    // Minimum over the admissible range of a convex function of delta.
    let gmin = |z: f64| -> f64 {
        let (mut a, mut b) = (0.0, z / kmax * (1.0 - 1e-12));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (g_at(z, c), g_at(z, d));
        for _ in 0..200 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = g_at(z, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = g_at(z, d);
            }
        }
        fc.min(fd)
    };
    let mut hi = 2.0 * kmax.sqrt() + 1.0;
    while gmin(hi) > 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gmin(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("at least one eigenvalue must be requested".into()));
    }
    Ok(())
}

/// Leading eigenvalues of `Q = A - alpha d d^T / 2L`. `q_star` counts the
/// eigenvalues above the band edge plus one for the cluster carried by the
/// trivial direction.
pub fn modularity_eigs(g: &Graph, alpha: f64, k: usize) -> Result<SpectralReport> {
    check_k(k)?;
    let n = g.n();
    let op = ModularityOp {
        g,
        alpha,
        degrees: g.degrees().map(|d| d as f64).collect(),
        two_l: g.total_degree() as f64,
    };
    let edge = modularity_band_edge(g);
    let opts = KrylovOptions {
        symmetric: true,
        max_restarts: MAX_RESTARTS,
        tol: EIG_TOL,
        seed: SOLVER_SEED,
    };
    let mut want = k.min(n);
    loop {
        let out = leading_eigenvalues(&op, want, opts, |_, conv| conv.iter().all(|&c| c));
        let above = out.values.iter().filter(|v| v.re > edge).count();
        if above == out.values.len() && want < n {
            want = (2 * want).min(n);
            continue;
        }
        return Ok(SpectralReport {
            matrix_kind: MatrixKind::Modularity,
            eigenvalues: out.values.iter().map(|v| v.re).collect(),
            imaginary: vec![0.0; out.values.len()],
            band_edge: edge,
            band_edge_estimated: true,
            q_star: above + 1,
            k_requested: k,
            converged: out.finished,
        });
    }
}

fn is_real(z: Complex64) -> bool {
    z.im.abs() < REALNESS_TOL * z.norm()
}

/// Leading eigenvalues (by real part) of the non-backtracking companion
/// matrix. The band edge is `sqrt(rho)` with `rho` the largest real
/// eigenvalue; `q_star` counts real eigenvalues above it, `rho` included.
pub fn nb_eigs(g: &Graph, k: usize) -> Result<SpectralReport> {
    check_k(k)?;
    let op = NonBacktrackingOp { g };
    let dim = op.dim();
    let opts = KrylovOptions {
        symmetric: false,
        max_restarts: MAX_RESTARTS,
        tol: EIG_TOL,
        seed: SOLVER_SEED,
    };
    let rho_of = |vals: &[Complex64]| -> f64 {
        vals.iter()
            .filter(|v| is_real(**v))
            .map(|v| v.re)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut want = k.min(dim);
    loop {
        let out = leading_eigenvalues(&op, want, opts, |vals, conv| {
            let rho = rho_of(vals);
            if !(rho > 0.0) {
                return false;
            }
            let edge = rho.sqrt();
            let outside = vals.iter().take_while(|v| v.re > edge).count();
            outside < vals.len() && conv[..outside].iter().all(|&c| c)
        });
        let rho = rho_of(&out.values).max(0.0);
        let edge = rho.sqrt();
        let outside = out.values.iter().filter(|v| v.re > edge).count();
        if outside == out.values.len() && want < dim {
            want = (2 * want).min(dim);
            continue;
        }
        let q_star = out
            .values
            .iter()
            .zip(&out.converged)
            .filter(|(v, &c)| (c || out.finished) && is_real(**v) && v.re >= edge && v.re > 0.0)
            .count();
        return Ok(SpectralReport {
            matrix_kind: MatrixKind::NonBacktracking,
            eigenvalues: out.values.iter().map(|v| v.re).collect(),
            imaginary: out.values.iter().map(|v| v.im).collect(),
            band_edge: edge,
            band_edge_estimated: false,
            q_star,
            k_requested: k,
            converged: out.finished,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumHistogram {
    pub band_edge: f64,
    pub eigenvalues: Vec<f64>,
    pub bins: Vec<HistogramBin>,
}

impl SpectrumHistogram {
    /// CSV with a `# band_edge=` comment line, then `bin_left,bin_right,count`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# band_edge={}", self.band_edge)?;
        writeln!(out, "bin_left,bin_right,count")?;
        for b in &self.bins {
            writeln!(out, "{},{},{}", b.bin_left, b.bin_right, b.count)?;
        }
        Ok(())
    }
}

/// Dense modularity matrix `A - alpha d d^T / 2L`.
pub fn dense_modularity_matrix(g: &Graph, alpha: f64) -> DMatrix<f64> {
    let n = g.n();
    let two_l = g.total_degree() as f64;
    let mut m = DMatrix::zeros(n, n);
    if two_l > 0.0 {
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = -alpha * (g.degree(i) * g.degree(j)) as f64 / two_l;
            }
        }
    }
    for &(i, j) in g.edges() {
        m[(i, j)] += 1.0;
        m[(j, i)] += 1.0;
    }
    m
}

/// Full modularity spectrum binned into `bins` equal-width bins.
pub fn modularity_spectrum_histogram(g: &Graph, alpha: f64, bins: usize) -> Result<SpectrumHistogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    if g.n() > DENSE_SPECTRUM_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "N = {} exceeds the dense-spectrum limit of {DENSE_SPECTRUM_LIMIT}; use the leading-k mode",
            g.n()
        )));
    }
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(dense_modularity_matrix(g, alpha))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let (lo, hi) = match (eigenvalues.last(), eigenvalues.first()) {
        (Some(&l), Some(&h)) if h - l > 1e-9 => (l, h),
        (Some(&l), Some(_)) => (l - 0.5, l + 0.5),
        _ => (0.0, 1.0),
    };
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &e in &eigenvalues {
        let b = (((e - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            bin_left: lo + b as f64 * width,
            bin_right: lo + (b + 1) as f64 * width,
            count,
        })
        .collect();
    Ok(SpectrumHistogram {
        band_edge: modularity_band_edge(g),
        eigenvalues,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circulant(n: usize, offsets: &[usize]) -> Graph {
        Graph::from_edges(n, (0..n).flat_map(|i| offsets.iter().map(move |&o| (i, (i + o) % n)))).unwrap()
    }

    #[test]
    fn regular_band_edge_is_exact() {
        let g = circulant(20, &[1, 2]);
        assert!((modularity_band_edge(&g) - 2.0 * 3f64.sqrt()).abs() < 1e-9);
        let g = circulant(9, &[1]);
        assert!((modularity_band_edge(&g) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn triangle_trace() {
        let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let h = modularity_spectrum_histogram(&g, 1.0, 4).unwrap();
        assert_eq!(h.eigenvalues.len(), 3);
        assert!((h.eigenvalues.iter().sum::<f64>() + 2.0).abs() < 1e-12);
        assert_eq!(h.bins.iter().map(|b| b.count).sum::<usize>(), 3);
    }

    #[test]
    fn edgeless_spectrum_is_a_spike() {
        let g = Graph::from_edges(4, std::iter::empty()).unwrap();
        let h = modularity_spectrum_histogram(&g, 1.0, 5).unwrap();
        assert!(h.eigenvalues.iter().all(|&e| e == 0.0));
        assert_eq!(h.bins.iter().filter(|b| b.count > 0).count(), 1);
    }

    #[test]
    fn default_k_rule() {
        assert_eq!(default_k(34, 10), 17);
        assert_eq!(default_k(1000, 2), 14);
        assert_eq!(default_k(1, 3), 1);
    }

    #[test]
    fn zero_k_is_rejected() {
        let g = circulant(6, &[1]);
        assert!(modularity_eigs(&g, 1.0, 0).is_err());
        assert!(nb_eigs(&g, 0).is_err());
    }

    #[test]
    fn cubic_nb_radius_is_two() {
        // Ring plus diameters: 3-regular.
        let g = circulant(12, &[1, 6]);
        let r = nb_eigs(&g, 4).unwrap();
        assert!((r.band_edge - 2f64.sqrt()).abs() < 1e-8, "{:?}", r);
    }
}
