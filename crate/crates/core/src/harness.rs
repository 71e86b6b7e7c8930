//! Sweeps `q`, fits and scores every value, and gathers spectral and greedy
//! estimates into one report.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{beta_star, beta_zero, em_fit, EmConfig, EmSummary};
use crate::criteria::{evaluate, CriteriaRecord};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::greedy::{greedy_stats, GreedyMethod, GreedySummary};
use crate::rng::derive;
use crate::spectral::{default_k, modularity_eigs, nb_eigs, SpectralReport};

/// Relative-improvement threshold of the default elbow rule.
pub const DEFAULT_ELBOW_DELTA: f64 = 0.01;

const GREEDY_STREAM: u64 = 0x6772_6565_6479;

/// Upper end of the default sweep, `min(30, N/10)` and at least 1.
pub fn default_q_max(n: usize) -> usize {
    (n / 10).clamp(1, 30)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub q_min: usize,
    /// `None` selects [`default_q_max`].
    pub q_max: Option<usize>,
    pub em: EmConfig,
    pub seed: u64,
    pub spectral: bool,
    /// Eigenvalues sought per matrix; `None` selects the default rule.
    pub spectral_k: Option<usize>,
    pub greedy_runs: usize,
    /// Resolution used by the Louvain baseline.
    pub greedy_alpha: f64,
    /// Keep the marginal rows in the report (needed for alluvial export).
    pub keep_marginals: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            q_min: 1,
            q_max: None,
            em: EmConfig::default(),
            seed: 0,
            spectral: true,
            spectral_k: None,
            greedy_runs: 10,
            greedy_alpha: 1.0,
            keep_marginals: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub q: usize,
    pub criteria: Option<CriteriaRecord>,
    pub beta0_ref: Option<f64>,
    pub betastar_ref: Option<f64>,
    pub fit: Option<EmSummary>,
    pub error: Option<String>,
}

impl SweepRow {
    pub fn factorized(&self) -> bool {
        self.criteria.as_ref().is_some_and(|c| c.factorized)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMeta {
    pub n: usize,
    pub l: usize,
    pub source: Option<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralColumns {
    pub modularity: Option<SpectralReport>,
    pub non_backtracking: Option<SpectralReport>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyColumns {
    pub louvain: Option<GreedySummary>,
    pub infomap: Option<GreedySummary>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    BetheF,
    Modularity,
    Mdl,
    EBayes,
    EGibbs,
    EMap,
    ETraining,
}

impl Criterion {
    pub const ALL: [Criterion; 7] = [
        Criterion::BetheF,
        Criterion::Modularity,
        Criterion::Mdl,
        Criterion::EBayes,
        Criterion::EGibbs,
        Criterion::EMap,
        Criterion::ETraining,
    ];

    pub fn maximize(self) -> bool {
        self == Criterion::Modularity
    }

    pub fn value(self, r: &CriteriaRecord) -> Option<f64> {
        let v = match self {
            Criterion::BetheF => r.bethe_f?,
            Criterion::Modularity => r.modularity,
            Criterion::Mdl => r.mdl_two_level,
            Criterion::EBayes => r.e_bayes,
            Criterion::EGibbs => r.e_gibbs,
            Criterion::EMap => r.e_map,
            Criterion::ETraining => r.e_training,
        };
        v.is_finite().then_some(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Argopt,
    Elbow(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub criterion: Criterion,
    pub rule: Rule,
    /// `None` means undetermined.
    pub q: Option<usize>,
    /// Set when the arg-optimum sits at the largest swept `q`.
    pub at_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub network: NetworkMeta,
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub spectral: Option<SpectralColumns>,
    pub greedy: Option<GreedyColumns>,
    pub selections: Vec<Selection>,
}

/// Rows eligible for selection: scored rows, dropping factorized rows after
/// the first factorized one.
fn eligible(rows: &[SweepRow]) -> Vec<&SweepRow> {
    let mut seen_factorized = false;
    let mut out = Vec::new();
    for row in rows {
        if row.criteria.is_none() {
            continue;
        }
        if row.factorized() {
            if seen_factorized {
                continue;
            }
            seen_factorized = true;
        }
        out.push(row);
    }
    out
}

/// Suggested `q` from one criterion's curve.
pub fn select_q(rows: &[SweepRow], criterion: Criterion, rule: Rule) -> Result<Selection> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows to select from".into()));
    }
    let undetermined = Selection {
        criterion,
        rule,
        q: None,
        at_boundary: false,
    };
    if rows.iter().all(|r| r.criteria.is_none() || r.factorized()) {
        return Ok(undetermined);
    }
    let curve: Vec<(usize, f64)> = eligible(rows)
        .into_iter()
        .filter_map(|r| Some((r.q, criterion.value(r.criteria.as_ref()?)?)))
        .collect();
    if curve.is_empty() {
        return Ok(undetermined);
    }
    let q_last = rows.iter().map(|r| r.q).max().unwrap_or(0);
    // Oriented so that larger is better.
    let score = |v: f64| if criterion.maximize() { v } else { -v };
    match rule {
        Rule::Argopt => {
            let mut best = curve[0];
            for &(q, v) in &curve[1..] {
                if score(v) > score(best.1) {
                    best = (q, v);
                }
            }
            Ok(Selection {
                q: Some(best.0),
                at_boundary: best.0 == q_last,
                ..undetermined
            })
        }
        Rule::Elbow(delta) => {
            for w in curve.windows(2) {
                let ((q, a), (_, b)) = (w[0], w[1]);
                let gain = (score(b) - score(a)) / a.abs().max(f64::MIN_POSITIVE);
                if gain < delta {
                    return Ok(Selection {
                        q: Some(q),
                        ..undetermined
                    });
                }
            }
            Ok(undetermined)
        }
    }
}

fn fit_row(g: &Graph, q: usize, cfg: &SweepConfig) -> SweepRow {
    let c = g.average_degree();
    let mut row = SweepRow {
        q,
        criteria: None,
        beta0_ref: beta_zero(q, c).ok(),
        betastar_ref: beta_star(q, c).ok(),
        fit: None,
        error: None,
    };
    match em_fit(g, q, &cfg.em, cfg.seed).and_then(|fit| Ok((evaluate(g, &fit)?, fit))) {
        Ok((record, fit)) => {
            row.criteria = Some(record);
            row.fit = Some(fit.summary(cfg.keep_marginals));
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Runs the full assessment. Per-`q` failures are recorded in their rows.
pub fn sweep(g: &Graph, cfg: &SweepConfig, source: Option<&str>) -> Result<SweepReport> {
    let q_max = cfg.q_max.unwrap_or_else(|| default_q_max(g.n()));
    if cfg.q_min == 0 || cfg.q_min > q_max {
        return Err(Error::InvalidArgument(format!(
            "q range {}..={q_max} must satisfy 1 <= q_min <= q_max",
            cfg.q_min
        )));
    }
    if g.m() == 0 {
        return Err(Error::EmptyGraph);
    }
    cfg.em.validate()?;

    let rows: Vec<SweepRow> = (cfg.q_min..=q_max)
        .into_par_iter()
        .map(|q| fit_row(g, q, cfg))
        .collect();

    let spectral = cfg.spectral.then(|| {
        let k = cfg.spectral_k.unwrap_or_else(|| default_k(g.n(), q_max));
        let mut errors = Vec::new();
        let mut keep = |r: Result<SpectralReport>| r.map_err(|e| errors.push(e.to_string())).ok();
        let modularity = keep(modularity_eigs(g, 1.0, k));
        let non_backtracking = keep(nb_eigs(g, k));
        SpectralColumns {
            modularity,
            non_backtracking,
            errors,
        }
    });

    let greedy = (cfg.greedy_runs > 0).then(|| {
        let mut errors = Vec::new();
        let mut run = |m: GreedyMethod, tag: u64| {
            greedy_stats(g, m, cfg.greedy_alpha, cfg.greedy_runs, derive(cfg.seed, &[GREEDY_STREAM, tag]))
                .map_err(|e| errors.push(e.to_string()))
                .ok()
        };
        let louvain = run(GreedyMethod::Louvain, 0);
        let infomap = run(GreedyMethod::Infomap, 1);
        GreedyColumns {
            louvain,
            infomap,
            errors,
        }
    });

    let mut selections = Vec::new();
    for criterion in Criterion::ALL {
        for rule in [Rule::Argopt, Rule::Elbow(DEFAULT_ELBOW_DELTA)] {
            selections.push(select_q(&rows, criterion, rule)?);
        }
    }

    Ok(SweepReport {
        network: NetworkMeta {
            n: g.n(),
            l: g.m(),
            source: source.map(str::to_string),
            seed: cfg.seed,
        },
        config: SweepConfig {
            q_max: Some(q_max),
            ..cfg.clone()
        },
        rows,
        spectral,
        greedy,
        selections,
    })
}

pub const CSV_HEADER: &str =
    "q,q_eff,bethe_f,modularity,mdl,e_bayes,e_gibbs,e_map,e_training,alpha,beta,beta0_ref,betastar_ref,factorized";

fn num(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "nan".to_string(),
    }
}

impl SweepReport {
    /// One CSV line per row; missing values are written as `nan`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for row in &self.rows {
            let c = row.criteria.as_ref();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.q,
                c.map_or("nan".to_string(), |c| c.q_effective.to_string()),
                num(c.and_then(|c| c.bethe_f)),
                num(c.map(|c| c.modularity)),
                num(c.map(|c| c.mdl_two_level)),
                num(c.map(|c| c.e_bayes)),
                num(c.map(|c| c.e_gibbs)),
                num(c.map(|c| c.e_map)),
                num(c.map(|c| c.e_training)),
                num(c.map(|c| c.alpha)),
                num(c.map(|c| c.beta)),
                num(row.beta0_ref),
                num(row.betastar_ref),
                row.factorized(),
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn selection(&self, criterion: Criterion, rule: Rule) -> Option<&Selection> {
        self.selections
            .iter()
            .find(|s| s.criterion == criterion && s.rule == rule)
    }
}
