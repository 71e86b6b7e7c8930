use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sweep::{compute_marginals, converge, init_messages, BpOptions};
use super::{initial_beta, m_step, beta_star, Marginals, Messages, ModelParams, ParamsRecord};
use crate::criteria::bethe_free_energy;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive, rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    /// Sweep budget per E step.
    pub max_sweeps: usize,
    pub msg_tol: f64,
    /// Relative change in either affinity below which EM stops.
    pub param_tol: f64,
    pub max_em_iters: usize,
    /// Sweep budget for a whole EM run, across all its E steps.
    pub max_total_sweeps: usize,
    pub restarts: usize,
    /// Size of the uniform noise added to the initial messages.
    pub noise: f64,
    pub factorized_tol: f64,
    /// Skip the M step and keep `alpha = 1`, `beta = beta*`.
    pub frozen_params: bool,
    pub damping: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            max_sweeps: 500,
            msg_tol: 1e-6,
            param_tol: 1e-5,
            max_em_iters: 100,
            max_total_sweeps: 1000,
            restarts: 5,
            noise: 0.1,
            factorized_tol: 1e-3,
            frozen_params: false,
            damping: 0.0,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if self.max_sweeps == 0 || self.max_em_iters == 0 || self.max_total_sweeps == 0 {
            return bad("sweep and EM iteration budgets must be positive");
        }
        if self.restarts == 0 {
            return bad("at least one restart is needed");
        }
        if !(self.msg_tol > 0.0 && self.param_tol > 0.0 && self.factorized_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be non-negative");
        }
        if !(0.0..1.0).contains(&self.damping) {
            return bad("damping must lie in [0, 1)");
        }
        Ok(())
    }

    fn bp_options(&self, used: usize) -> BpOptions {
        BpOptions {
            max_sweeps: self.max_sweeps.min(self.max_total_sweeps - used),
            tol: self.msg_tol,
            damping: self.damping,
            frozen_theta: false,
        }
    }
}

/// A fitted state at one `q`.
#[derive(Debug, Clone)]
pub struct EmResult {
    pub q: usize,
    pub seed: u64,
    pub marginals: Marginals,
    pub messages: Messages,
    pub params: ModelParams,
    pub converged: bool,
    pub factorized: bool,
    pub sweeps_used: usize,
    pub em_iterations: usize,
    /// `None` when `beta = 0`, where the free energy is undefined.
    pub bethe_free_energy: Option<f64>,
}

/// JSON view of an [`EmResult`]; marginal rows only when requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmSummary {
    pub q: usize,
    pub seed: u64,
    pub params: ParamsRecord,
    pub converged: bool,
    pub factorized: bool,
    pub sweeps_used: usize,
    pub em_iterations: usize,
    pub bethe_free_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub marginals: Option<Vec<Vec<f64>>>,
}

impl EmResult {
    pub fn summary(&self, with_marginals: bool) -> EmSummary {
        EmSummary {
            q: self.q,
            seed: self.seed,
            params: self.params.record(),
            converged: self.converged,
            factorized: self.factorized,
            sweeps_used: self.sweeps_used,
            em_iterations: self.em_iterations,
            bethe_free_energy: self.bethe_free_energy,
            marginals: with_marginals.then(|| self.marginals.rows()),
        }
    }
}

fn initial_params(g: &Graph, q: usize, cfg: &EmConfig) -> Result<ModelParams> {
    let c = g.average_degree();
    let beta = if cfg.frozen_params {
        beta_star(q, c).unwrap_or_else(|_| (q as f64).ln_1p())
    } else {
        initial_beta(q, c)
    };
    ModelParams::from_alpha_beta(1.0, beta, g.total_degree() as f64)
}

fn relative_change(a: &ModelParams, b: &ModelParams) -> f64 {
    let r = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs());
    r(a.omega_in(), b.omega_in()).max(r(a.omega_out(), b.omega_out()))
}

/// One EM run from the initial state derived from `seed`.
pub fn em_fit_single(g: &Graph, q: usize, cfg: &EmConfig, seed: u64) -> Result<EmResult> {
    if q == 0 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }
    if g.m() == 0 {
        return Err(Error::EmptyGraph);
    }
    cfg.validate()?;
    let two_l = g.total_degree() as f64;
    let mut params = initial_params(g, q, cfg)?;

    if q == 1 {
        // A single label: messages are all 1 and only omega_in is identifiable,
        // so beta stays at its starting value.
        if !cfg.frozen_params {
            let omega_in = 1.0 / two_l;
            params = ModelParams::new(omega_in, omega_in * (-params.beta()).exp(), two_l)?;
        }
        let messages = Messages::uniform(g, 1);
        let marginals = compute_marginals(g, &params, &messages)?;
        let bethe = bethe_free_energy(g, &messages, &marginals, &params).ok();
        return Ok(EmResult {
            q,
            seed,
            marginals,
            messages,
            params,
            converged: true,
            factorized: true,
            sweeps_used: 0,
            em_iterations: 0,
            bethe_free_energy: bethe,
        });
    }

    let mut r = rng(seed);
    let mut messages = init_messages(g, q, cfg.noise, &mut r);
    let mut marginals = compute_marginals(g, &params, &messages)?;
    let mut sweeps_used = 0;
    let mut em_iterations = 0;
    let mut params_settled = cfg.frozen_params;
    let mut bp_converged = false;
    while em_iterations < cfg.max_em_iters && sweeps_used < cfg.max_total_sweeps {
        em_iterations += 1;
        let opts = cfg.bp_options(sweeps_used);
        let out = converge(g, &params, &mut messages, &mut marginals, &opts, &mut r)?;
        sweeps_used += out.sweeps;
        bp_converged = out.converged;
        if cfg.frozen_params {
            break;
        }
        match m_step(g, &messages, &marginals, &params) {
            Ok(next) => {
                if relative_change(&params, &next) < cfg.param_tol {
                    params_settled = true;
                    break;
                }
                params = next;
            }
            // Every vertex collapsed onto one channel; keep the last valid affinities.
            Err(Error::DegeneratePartition(_)) => break,
            Err(e) => return Err(e),
        }
    }
    let factorized = marginals.max_deviation_from_uniform() < cfg.factorized_tol;
    let bethe = bethe_free_energy(g, &messages, &marginals, &params).ok();
    Ok(EmResult {
        q,
        seed,
        marginals,
        messages,
        params,
        converged: bp_converged && params_settled,
        factorized,
        sweeps_used,
        em_iterations,
        bethe_free_energy: bethe,
    })
}

/// Best of `cfg.restarts` independent EM runs, ranked by Bethe free energy
/// (undefined values rank last, ties go to the earlier restart). Restarts run
/// in parallel; restart `r` uses the sub-seed `derive(seed, [q, r])`.
pub fn em_fit(g: &Graph, q: usize, cfg: &EmConfig, seed: u64) -> Result<EmResult> {
    cfg.validate()?;
    let runs: Vec<Result<EmResult>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| em_fit_single(g, q, cfg, derive(seed, &[q as u64, r as u64])))
        .collect();
    let mut best: Option<EmResult> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(res) => {
                let better = match &best {
                    None => true,
                    Some(b) => match (res.bethe_free_energy, b.bethe_free_energy) {
                        (Some(x), Some(y)) => x < y,
                        (Some(_), None) => true,
                        _ => false,
                    },
                };
                if better {
                    best = Some(res);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one restart ran"),
    }
}
