use rand::seq::SliceRandom;
use rand::Rng as _;

use super::{normalize, Marginals, Messages, ModelParams};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::Rng;

/// Knobs for one belief-propagation run at fixed parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpOptions {
    pub max_sweeps: usize,
    /// Stop once the largest message change in a sweep is below this.
    pub tol: f64,
    /// Weight kept from the old message, in `[0, 1)`.
    pub damping: f64,
    /// Keep `theta` fixed instead of tracking the marginals.
    pub frozen_theta: bool,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            max_sweeps: 500,
            tol: 1e-6,
            damping: 0.0,
            frozen_theta: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOutcome {
    pub sweeps: usize,
    pub residual: f64,
    pub converged: bool,
    /// Damping in effect at the end (raised when the residual stalls).
    pub damping: f64,
}

/// `ln(1 + psi (e^beta - 1))`, evaluated without overflow for large `|beta|`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EdgeFactor {
    beta: f64,
    em1: f64,
    e_neg: f64,
    e_pos: f64,
}

impl EdgeFactor {
    pub(crate) fn new(beta: f64) -> Self {
        EdgeFactor {
            beta,
            em1: beta.exp_m1(),
            e_neg: (-beta).exp(),
            e_pos: beta.exp(),
        }
    }

    #[inline]
    pub(crate) fn log(&self, psi: f64) -> f64 {
        if self.beta > 20.0 {
            self.beta + (psi + (1.0 - psi) * self.e_neg).ln()
        } else if self.beta < -20.0 {
            ((1.0 - psi) + psi * self.e_pos).ln()
        } else {
            (psi * self.em1).ln_1p()
        }
    }
}

/// In-place softmax; returns an error when the input has a NaN.
fn softmax(v: &mut [f64]) -> Result<()> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::NonFinite {
            context: "cavity field",
        });
    }
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
    Ok(())
}

struct Scratch {
    field: Vec<f64>,
    incoming: Vec<f64>,
    out: Vec<f64>,
    delta: Vec<f64>,
}

impl Scratch {
    fn new(q: usize) -> Self {
        Scratch {
            field: vec![0.0; q],
            incoming: Vec::new(),
            out: vec![0.0; q],
            delta: vec![0.0; q],
        }
    }
}

/// Log cavity field of vertex `i`: the external field plus every incoming
/// edge factor. The per-edge factors are left in `scratch.incoming`.
fn vertex_field(
    g: &Graph,
    params: &ModelParams,
    factor: &EdgeFactor,
    msgs: &Messages,
    theta: &[f64],
    i: usize,
    s: &mut Scratch,
) {
    let q = msgs.q();
    let d = g.degree(i) as f64;
    let h = params.coupling() * d;
    for (f, t) in s.field.iter_mut().zip(theta) {
        *f = -h * t;
    }
    s.incoming.clear();
    for e in g.out_edges(i) {
        let m = msgs.get(g.reverse(e));
        for k in 0..q {
            let l = factor.log(m[k]);
            s.incoming.push(l);
            s.field[k] += l;
        }
    }
}

/// Updates every outgoing message of `i` and its marginal. Returns the
/// largest change in a message entry.
fn update_vertex(
    g: &Graph,
    params: &ModelParams,
    factor: &EdgeFactor,
    msgs: &mut Messages,
    marg: &mut Marginals,
    i: usize,
    damping: f64,
    frozen_theta: bool,
    s: &mut Scratch,
) -> Result<f64> {
    let q = msgs.q();
    vertex_field(g, params, factor, msgs, marg.theta(), i, s);
    let mut residual: f64 = 0.0;
    for (slot, e) in g.out_edges(i).enumerate() {
        for k in 0..q {
            s.out[k] = s.field[k] - s.incoming[slot * q + k];
        }
        softmax(&mut s.out)?;
        let old = msgs.get_mut(e);
        for k in 0..q {
            let new = (1.0 - damping) * s.out[k] + damping * old[k];
            residual = residual.max((new - old[k]).abs());
            old[k] = new;
        }
        if damping > 0.0 {
            normalize(old);
        }
    }
    softmax(&mut s.field)?;
    let d = g.degree(i) as f64;
    if frozen_theta {
        marg.get_mut(i).copy_from_slice(&s.field);
    } else {
        let m = marg.get_mut(i);
        for k in 0..q {
            s.delta[k] = d * (s.field[k] - m[k]);
            m[k] = s.field[k];
        }
        for (t, dt) in marg.theta_mut().iter_mut().zip(&s.delta) {
            *t += dt;
        }
    }
    Ok(residual)
}

/// One sweep over all vertices in random order. Each visit refreshes all
/// outgoing messages of the vertex, its marginal, and (unless frozen) the
/// field `theta`. Returns the largest message change.
pub fn bp_sweep(
    g: &Graph,
    params: &ModelParams,
    msgs: &mut Messages,
    marg: &mut Marginals,
    damping: f64,
    frozen_theta: bool,
    rng: &mut Rng,
) -> Result<f64> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::InvalidArgument(format!("damping {damping} not in [0, 1)")));
    }
    let factor = EdgeFactor::new(params.beta());
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.shuffle(rng);
    let mut scratch = Scratch::new(msgs.q());
    let mut residual: f64 = 0.0;
    for i in order {
        let r = update_vertex(g, params, &factor, msgs, marg, i, damping, frozen_theta, &mut scratch)?;
        residual = residual.max(r);
    }
    if !frozen_theta {
        // Clear the drift of the incremental updates.
        marg.refresh_theta(g);
    }
    Ok(residual)
}

/// Marginals for a fixed field `theta`.
pub fn marginals_with_field(
    g: &Graph,
    params: &ModelParams,
    msgs: &Messages,
    theta: &[f64],
) -> Result<Marginals> {
    let q = msgs.q();
    let factor = EdgeFactor::new(params.beta());
    let mut s = Scratch::new(q);
    let mut psi = Vec::with_capacity(g.n() * q);
    for i in 0..g.n() {
        vertex_field(g, params, &factor, msgs, theta, i, &mut s);
        softmax(&mut s.field)?;
        psi.extend_from_slice(&s.field);
    }
    Ok(Marginals::from_parts(q, psi, theta.to_vec()))
}

/// Marginals with `theta` solved self-consistently by fixed-point iteration.
pub fn compute_marginals(g: &Graph, params: &ModelParams, msgs: &Messages) -> Result<Marginals> {
    let q = msgs.q();
    let two_l = g.total_degree() as f64;
    let mut marg = Marginals::uniform(g, q);
    for _ in 0..200 {
        let theta = marg.theta().to_vec();
        marg = marginals_with_field(g, params, msgs, &theta)?;
        marg.refresh_theta(g);
        let change = marg
            .theta()
            .iter()
            .zip(&theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change <= 1e-12 * two_l {
            break;
        }
    }
    Ok(marg)
}

/// Uniform messages plus noise of size `noise`, renormalized.
pub fn init_messages(g: &Graph, q: usize, noise: f64, rng: &mut Rng) -> Messages {
    let u = 1.0 / q as f64;
    Messages::from_fn(g, q, |_, m| {
        for x in m.iter_mut() {
            *x = u + noise * rng.gen::<f64>();
        }
    })
}

/// Sweeps until the residual drops below `opts.tol` or the budget runs out.
/// If the residual has not improved for 10 sweeps, damping is raised to 0.5.
pub fn converge(
    g: &Graph,
    params: &ModelParams,
    msgs: &mut Messages,
    marg: &mut Marginals,
    opts: &BpOptions,
    rng: &mut Rng,
) -> Result<SweepOutcome> {
    const WINDOW: usize = 10;
    let mut damping = opts.damping;
    let mut history: Vec<f64> = Vec::new();
    let mut residual = f64::INFINITY;
    for sweep in 1..=opts.max_sweeps {
        residual = bp_sweep(g, params, msgs, marg, damping, opts.frozen_theta, rng)?;
        if residual < opts.tol {
            return Ok(SweepOutcome {
                sweeps: sweep,
                residual,
                converged: true,
                damping,
            });
        }
        history.push(residual);
        if damping < 0.5 && history.len() > WINDOW {
            let base = history[history.len() - 1 - WINDOW];
            let recent = &history[history.len() - WINDOW..];
            if recent.iter().all(|&r| r >= base) {
                damping = 0.5;
            }
        }
    }
    Ok(SweepOutcome {
        sweeps: opts.max_sweeps,
        residual,
        converged: false,
        damping,
    })
}

/// Fresh messages, self-consistent marginals, then [`converge`].
pub fn run_bp(
    g: &Graph,
    params: &ModelParams,
    q: usize,
    noise: f64,
    opts: &BpOptions,
    rng: &mut Rng,
) -> Result<(Messages, Marginals, SweepOutcome)> {
    let mut msgs = init_messages(g, q, noise, rng);
    let mut marg = compute_marginals(g, params, &msgs)?;
    let out = converge(g, params, &mut msgs, &mut marg, opts, rng)?;
    Ok((msgs, marg, out))
}
