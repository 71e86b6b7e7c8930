//! Restarted Krylov eigensolver for a few eigenvalues with the largest real part.
//!
//! The basis `V` is kept orthonormal together with `W = A V`. Each cycle
//! grows the basis by orthogonalizing the newest column of `W` against `V`,
//! does Rayleigh-Ritz on `H = V^T W`, then shrinks the basis back to the
//! wanted Ritz subspace. Because all Ritz residuals of a Krylov space point
//! the same way, growing from any kept column continues the Krylov sequence,
//! which makes this a Krylov-Schur iteration without the explicit Schur form.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng as _;

use crate::rng::rng;

/// A linear operator on `R^dim`.
pub(crate) trait LinOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

#[derive(Debug, Clone)]
pub(crate) struct KrylovOutcome {
    /// Ritz values, largest real part first.
    pub values: Vec<Complex64>,
    pub converged: Vec<bool>,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct KrylovOptions {
    pub symmetric: bool,
    pub max_restarts: usize,
    pub tol: f64,
    pub seed: u64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Two rounds of classical Gram-Schmidt; returns the remaining norm.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.iter().map(|v| dot(v, w)).collect();
        for (v, c) in basis.iter().zip(coeffs) {
            for (x, y) in w.iter_mut().zip(v) {
                *x -= c * y;
            }
        }
    }
    norm(w)
}

/// Columns `basis * coeffs`, each of length `n`.
fn combine(basis: &[Vec<f64>], coeffs: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = basis[0].len();
    (0..coeffs.ncols())
        .map(|c| {
            let mut out = vec![0.0; n];
            for (r, v) in basis.iter().enumerate() {
                let a = coeffs[(r, c)];
                if a != 0.0 {
                    for (o, x) in out.iter_mut().zip(v) {
                        *o += a * x;
                    }
                }
            }
            out
        })
        .collect()
}

/// Eigenvector of a small real matrix for a (possibly complex) eigenvalue,
/// by inverse iteration with a slightly shifted pole.
fn ritz_vector(h: &DMatrix<f64>, theta: Complex64) -> DVector<Complex64> {
    let p = h.nrows();
    let scale = theta.norm().max(1.0);
    let shift = theta + Complex64::new(1e-10 * scale, 1e-10 * scale);
    let mut m: DMatrix<Complex64> = h.map(|x| Complex64::new(x, 0.0));
    for i in 0..p {
        m[(i, i)] -= shift;
    }
    let lu = m.lu();
    let mut x = DVector::from_fn(p, |i, _| Complex64::new(1.0 + 0.1 * i as f64 / p as f64, 0.05));
    for _ in 0..3 {
        match lu.solve(&x) {
            Some(y) => {
                let nrm = y.norm();
                if !(nrm.is_finite() && nrm > 0.0) {
                    break;
                }
                x = y / Complex64::new(nrm, 0.0);
            }
            None => break,
        }
    }
    let nrm = x.norm();
    x / Complex64::new(nrm, 0.0)
}

struct Ritz {
    value: Complex64,
    vector: DVector<Complex64>,
}

fn order_desc(a: &Complex64, b: &Complex64) -> std::cmp::Ordering {
    b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im))
}

fn ritz_pairs(h: &DMatrix<f64>, symmetric: bool) -> Vec<Ritz> {
    let mut pairs: Vec<Ritz> = if symmetric {
        let sym = (h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        (0..h.nrows())
            .map(|i| Ritz {
                value: Complex64::new(eig.eigenvalues[i], 0.0),
                vector: eig.eigenvectors.column(i).map(|x| Complex64::new(x, 0.0)),
            })
            .collect()
    } else {
        h.complex_eigenvalues()
            .iter()
            .map(|&value| Ritz {
                value,
                vector: ritz_vector(h, value),
            })
            .collect()
    };
    pairs.sort_by(|a, b| order_desc(&a.value, &b.value));
    pairs
}

fn is_real(z: Complex64) -> bool {
    z.im.abs() <= 1e-12 * z.norm().max(1e-300)
}

/// Residual `|| W y - theta V y ||` of a Ritz pair.
fn residual(v: &[Vec<f64>], w: &[Vec<f64>], pair: &Ritz) -> f64 {
    let n = v[0].len();
    let (mut rr, mut ri) = (vec![0.0; n], vec![0.0; n]);
    let t = pair.value;
    for (c, (vc, wc)) in v.iter().zip(w).enumerate() {
        let y = pair.vector[c];
        for i in 0..n {
            // (W - theta V) y with complex y and theta.
            let a = wc[i] - t.re * vc[i];
            let b = -t.im * vc[i];
            rr[i] += a * y.re - b * y.im;
            ri[i] += a * y.im + b * y.re;
        }
    }
    (dot(&rr, &rr) + dot(&ri, &ri)).sqrt()
}

/// Finds `k` eigenvalues with the largest real part. `done` sees the current
/// leading Ritz values and their convergence flags and may stop early.
pub(crate) fn leading_eigenvalues<F>(op: &dyn LinOp, k: usize, opts: KrylovOptions, done: F) -> KrylovOutcome
where
    F: Fn(&[Complex64], &[bool]) -> bool,
{
    let n = op.dim();
    let k = k.clamp(1, n.max(1));
    let m = (2 * k + 20).max(k + 30).min(n);
    let mut r = rng(opts.seed);
    let random_vec = |r: &mut crate::rng::Rng| -> Vec<f64> { (0..n).map(|_| r.gen::<f64>() - 0.5).collect() };

    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut w: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut start = random_vec(&mut r);
    let s = norm(&start);
    start.iter_mut().for_each(|x| *x /= s);
    let mut aw = vec![0.0; n];
    op.apply(&start, &mut aw);
    v.push(start);
    w.push(aw);

    let mut restarts = 0;
    loop {
        while v.len() < m {
            let mut next = w.last().expect("basis is never empty").clone();
            let before = norm(&next);
            let mut nrm = orthogonalize(&mut next, &v);
            if nrm <= 1e-10 * before.max(1e-300) {
                // Invariant subspace: continue with a fresh direction.
                next = random_vec(&mut r);
                nrm = orthogonalize(&mut next, &v);
                if nrm <= 1e-10 {
                    break;
                }
            }
            next.iter_mut().for_each(|x| *x /= nrm);
            let mut an = vec![0.0; n];
            op.apply(&next, &mut an);
            v.push(next);
            w.push(an);
        }
        let p = v.len();
        let h = DMatrix::from_fn(p, p, |i, j| dot(&v[i], &w[j]));
        let pairs = ritz_pairs(&h, opts.symmetric);
        let scale = pairs.iter().map(|x| x.value.norm()).fold(1.0, f64::max);
        let take = k.min(p);
        let values: Vec<Complex64> = pairs[..take].iter().map(|x| x.value).collect();
        let residuals: Vec<f64> = pairs[..take].iter().map(|x| residual(&v, &w, x)).collect();
        let converged: Vec<bool> = residuals.iter().map(|&res| res <= opts.tol * scale).collect();
        let exhausted = p == n;
        if exhausted || done(&values, &converged) || restarts >= opts.max_restarts {
            let finished = exhausted || done(&values, &converged);
            return KrylovOutcome {
                values,
                converged,
                finished,
            };
        }

        // Keep the wanted Ritz subspace, completing conjugate pairs.
        let mut keep = take;
        if keep < p && !is_real(pairs[keep - 1].value) && pairs[keep - 1].value.im > 0.0 {
            keep += 1;
        }
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for pair in &pairs[..keep] {
            if is_real(pair.value) {
                cols.push(pair.vector.map(|z| z.re));
            } else if pair.value.im > 0.0 {
                cols.push(pair.vector.map(|z| z.re));
                cols.push(pair.vector.map(|z| z.im));
            }
        }
        if cols.len() >= p {
            cols.truncate(p - 1);
        }
        let y = DMatrix::from_columns(&cols);
        let q = y.qr().q();
        let mut nv = combine(&v, &q);
        let mut nw = combine(&w, &q);
        // Re-orthonormalize against accumulated rounding.
        for idx in 0..nv.len() {
            let (head, tail) = nv.split_at_mut(idx);
            let col = &mut tail[0];
            let before = norm(col);
            let nrm = orthogonalize(col, head);
            if nrm < 1e-8 * before.max(1e-300) {
                continue;
            }
            if (nrm - 1.0).abs() > 1e-12 {
                col.iter_mut().for_each(|x| *x /= nrm);
                let mut an = vec![0.0; n];
                op.apply(col, &mut an);
                nw[idx] = an;
            }
        }
        v = nv;
        w = nw;
        restarts += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense(DMatrix<f64>);

    impl LinOp for Dense {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            let r = &self.0 * DVector::from_column_slice(x);
            y.copy_from_slice(r.as_slice());
        }
    }

    fn all_converged(_: &[Complex64], c: &[bool]) -> bool {
        c.iter().all(|&b| b)
    }

    #[test]
    fn symmetric_matches_dense() {
        let n = 150;
        let mut r = rng(3);
        let mut a = DMatrix::from_fn(n, n, |_, _| r.gen::<f64>() - 0.5);
        a = &a + a.transpose();
        let mut exact: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
        exact.sort_by(|x, y| y.total_cmp(x));
        let opts = KrylovOptions {
            symmetric: true,
            max_restarts: 500,
            tol: 1e-12,
            seed: 1,
        };
        let out = leading_eigenvalues(&Dense(a), 5, opts, all_converged);
        assert!(out.finished);
        for (got, want) in out.values.iter().zip(&exact) {
            assert!((got.re - want).abs() < 1e-8, "{got} vs {want}");
        }
    }

    #[test]
    fn general_matches_dense() {
        let n = 120;
        let mut r = rng(8);
        let mut a = DMatrix::from_fn(n, n, |_, _| r.gen::<f64>() - 0.5);
        for i in 0..3 {
            a[(i, i)] += 8.0 + i as f64;
        }
        let mut exact: Vec<Complex64> = a.complex_eigenvalues().iter().copied().collect();
        exact.sort_by(order_desc);
        let opts = KrylovOptions {
            symmetric: false,
            max_restarts: 500,
            tol: 1e-12,
            seed: 2,
        };
        let out = leading_eigenvalues(&Dense(a), 3, opts, all_converged);
        assert!(out.finished);
        for (got, want) in out.values.iter().zip(&exact) {
            assert!((got - want).norm() < 1e-8, "{got} vs {want}");
        }
    }
}
