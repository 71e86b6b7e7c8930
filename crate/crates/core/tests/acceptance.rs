//! Acceptance checks. Runs as a plain binary (no libtest harness) and prints
//! one PASS/FAIL line per criterion; exits non-zero if any criterion fails.
//!
//! Networks for the spectral table are read from `tests/fixtures/<name>.txt`
//! or, if set, from the directory in `SBMQ_EXTRA_FIXTURES`.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng as _;

use sbmq::alluvial::{build_bundle, export_alluvial, read_alluvial, SIGNIFICANCE_THRESHOLD};
use sbmq::bp::{
    beta_star, beta_zero, bp_sweep, compute_marginals, converge, em_fit, init_messages, marginals_with_field,
    BpOptions, EmConfig, Messages, ModelParams,
};
use sbmq::criteria::{bethe_free_energy, e_bayes, e_gibbs, e_map, e_training, map_equation_mdl, modularity, PairStats};
use sbmq::generators::{generate_dcsbm, generate_sbm, power_law_propensities, DcSbmSpec, SbmSpec};
use sbmq::graph::load_edge_list;
use sbmq::greedy::{greedy_stats, GreedyMethod};
use sbmq::harness::{select_q, sweep, Criterion, Rule, SweepConfig, SweepReport};
use sbmq::rng::{derive, rng, Rng};
use sbmq::spectral::{modularity_eigs, nb_eigs};
use sbmq::{Graph, Partition};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fixture(name: &str) -> Option<PathBuf> {
    let mut dirs = vec![PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")];
    if let Some(extra) = std::env::var_os("SBMQ_EXTRA_FIXTURES") {
        dirs.insert(0, PathBuf::from(extra));
    }
    dirs.into_iter().map(|d| d.join(format!("{name}.txt"))).find(|p| p.exists())
}

fn spectral_table() -> Outcome {
    let table = [
        ("karate", 1, 2),
        ("dolphins", 2, 2),
        ("football", 10, 10),
        ("polbooks", 2, 3),
    ];
    let mut report = Vec::new();
    let mut failures = Vec::new();
    for (name, want_mod, want_nb) in table {
        let Some(path) = fixture(name) else {
            failures.push(format!("{name}: network file not available"));
            continue;
        };
        let t = Instant::now();
        let g = load_edge_list(&path).map_err(|e| e.to_string())?;
        let k = 30.min(g.n() / 2);
        let m = modularity_eigs(&g, 1.0, k).map_err(|e| e.to_string())?;
        let b = nb_eigs(&g, k).map_err(|e| e.to_string())?;
        let elapsed = t.elapsed();
        report.push(format!("{name} mod={} nb={}", m.q_star, b.q_star));
        if m.q_star != want_mod || b.q_star != want_nb {
            failures.push(format!(
                "{name}: got mod={} nb={}, expected {want_mod}/{want_nb}",
                m.q_star, b.q_star
            ));
        }
        if elapsed > Duration::from_secs(10) {
            failures.push(format!("{name}: took {elapsed:?}"));
        }
    }
    if failures.is_empty() {
        Ok(report.join(", "))
    } else {
        Err(format!("{} [{}]", failures.join("; "), report.join(", ")))
    }
}

fn greedy_overfit() -> Outcome {
    let mut means = Vec::new();
    for (n, seed) in [(2000, 21), (8000, 22)] {
        let spec = SbmSpec::with_average_degree(n, 2, 6.0, 0.5).map_err(|e| e.to_string())?;
        let (g, _) = generate_sbm(&spec, seed).map_err(|e| e.to_string())?;
        let l = greedy_stats(&g, GreedyMethod::Louvain, 1.0, 30, seed).map_err(|e| e.to_string())?;
        let i = greedy_stats(&g, GreedyMethod::Infomap, 1.0, 30, seed).map_err(|e| e.to_string())?;
        ensure(l.runs.len() == 30 && i.runs.len() == 30, || "expected 30 runs".into())?;
        means.push((n, l.q_star.mean, i.q_star.mean));
    }
    let summary = means
        .iter()
        .map(|(n, l, i)| format!("N={n}: louvain {l:.1}, infomap {i:.1}"))
        .collect::<Vec<_>>()
        .join("; ");
    let (small, large) = (means[0], means[1]);
    ensure(small.1 >= 5.0 && small.2 >= 5.0, || format!("mean q* below 5 at N=2000 ({summary})"))?;
    ensure(large.1 > small.1 && large.2 > small.2, || format!("mean q* does not grow with N ({summary})"))?;
    Ok(summary)
}

fn strong_retrieval() -> Outcome {
    let spec = SbmSpec::with_average_degree(2000, 2, 8.0, 0.05).map_err(|e| e.to_string())?;
    let (g, truth) = generate_sbm(&spec, 31).map_err(|e| e.to_string())?;
    let fit = em_fit(&g, 2, &EmConfig::default(), 5).map_err(|e| e.to_string())?;
    let found = Partition::new(fit.marginals.argmax_labels(), 2).map_err(|e| e.to_string())?;
    let overlap = truth.overlap(&found);
    ensure(overlap >= 0.95, || format!("overlap {overlap:.4} < 0.95"))?;

    let cfg = SweepConfig {
        q_min: 1,
        q_max: Some(5),
        seed: 5,
        spectral: false,
        greedy_runs: 0,
        ..SweepConfig::default()
    };
    let report = sweep(&g, &cfg, None).map_err(|e| e.to_string())?;
    // Arg-minimum over every row that has a value, factorized or not.
    let (best_q, _) = report
        .rows
        .iter()
        .filter_map(|r| Some((r.q, r.criteria.as_ref()?.e_bayes)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or("no E_Bayes values")?;
    ensure(best_q == 2, || format!("E_Bayes arg-minimum at q={best_q}"))?;
    let f = |q: usize| {
        report.rows[q - 1]
            .criteria
            .as_ref()
            .and_then(|c| c.bethe_f)
            .ok_or(format!("no free energy at q={q}"))
    };
    let (f2, f3) = (f(2)?, f(3)?);
    let gain = (f2 - f3) / f2.abs();
    ensure(gain < 0.01, || format!("free energy improves by {:.3}% from q=2 to q=3", 100.0 * gain))?;
    Ok(format!(
        "overlap {overlap:.4}, E_Bayes argmin q=2, f(2)={f2:.4}, f(3)={f3:.4}"
    ))
}

/// Uniform random labelled tree: vertex `i > 0` attaches to a random earlier
/// vertex, then labels are shuffled.
fn random_tree(n: usize, r: &mut Rng) -> Graph {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(r);
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (perm[i], perm[r.gen_range(0..i)])).collect();
    Graph::from_edges(n, edges).expect("valid tree")
}

struct Enumerated {
    log_z: f64,
    marginals: Vec<Vec<f64>>,
    /// Probability that the endpoints of each undirected edge agree.
    same: Vec<f64>,
}

/// Exact distribution `P(s) ~ prod_i exp(-d_i (2L w_out + (w_in - w_out) theta_{s_i}))
/// prod_E d_i d_j w(s_i, s_j)` by listing every labelling.
fn enumerate(g: &Graph, q: usize, p: &ModelParams, theta: &[f64]) -> Enumerated {
    let n = g.n();
    let two_l = g.total_degree() as f64;
    let coupling = p.omega_in() - p.omega_out();
    let edges = g.edges();
    let total = q.pow(n as u32);
    let mut log_w = Vec::with_capacity(total);
    let mut labels = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % q;
            c /= q;
        }
        let mut lw = 0.0;
        for i in 0..n {
            let d = g.degree(i) as f64;
            lw -= d * (two_l * p.omega_out() + coupling * theta[labels[i]]);
        }
        for &(i, j) in edges {
            let w = if labels[i] == labels[j] { p.omega_in() } else { p.omega_out() };
            lw += ((g.degree(i) * g.degree(j)) as f64 * w).ln();
        }
        log_w.push(lw);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_w.iter().map(|w| (w - max).exp()).sum();
    let mut marginals = vec![vec![0.0; q]; n];
    let mut same = vec![0.0; edges.len()];
    for (code, lw) in log_w.iter().enumerate() {
        let prob = (lw - max).exp() / z;
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % q;
            c /= q;
        }
        for i in 0..n {
            marginals[i][labels[i]] += prob;
        }
        for (k, &(i, j)) in edges.iter().enumerate() {
            if labels[i] == labels[j] {
                same[k] += prob;
            }
        }
    }
    Enumerated {
        log_z: max + z.ln(),
        marginals,
        same,
    }
}

fn tree_case(case: usize) -> Result<f64, String> {
    let mut r = rng(derive(4242, &[case as u64]));
    let q = if case.is_multiple_of(2) { 2 } else { 3 };
    let n = if q == 2 { r.gen_range(3..=12) } else { r.gen_range(3..=9) };
    let g = random_tree(n, &mut r);
    let two_l = g.total_degree() as f64;
    let beta = if r.gen_bool(0.2) { -r.gen_range(0.2..1.5) } else { r.gen_range(0.2..3.0) };
    let omega_out = r.gen_range(0.3..3.0) / two_l;
    let p = ModelParams::new(omega_out * f64::exp(beta), omega_out, two_l).map_err(|e| e.to_string())?;

    // A frozen, deliberately non-uniform field. (At beta > 0 the only
    // self-consistent field is uniform, which would make every marginal 1/q.)
    let weights: Vec<f64> = (0..q).map(|_| r.gen_range(0.2..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let theta: Vec<f64> = weights.iter().map(|w| two_l * w / total).collect();
    let exact = enumerate(&g, q, &p, &theta);

    let mut br = rng(derive(77, &[case as u64]));
    let mut msgs = init_messages(&g, q, 0.5, &mut br);
    let mut marg = marginals_with_field(&g, &p, &msgs, &theta).map_err(|e| e.to_string())?;
    let opts = BpOptions {
        max_sweeps: 1000,
        tol: 1e-15,
        damping: 0.0,
        frozen_theta: true,
    };
    let out = converge(&g, &p, &mut msgs, &mut marg, &opts, &mut br).map_err(|e| e.to_string())?;
    ensure(out.converged, || format!("case {case}: BP did not converge"))?;
    let marg = marginals_with_field(&g, &p, &msgs, &theta).map_err(|e| e.to_string())?;

    let mut worst: f64 = 0.0;
    for i in 0..n {
        for s in 0..q {
            worst = worst.max((marg.get(i)[s] - exact.marginals[i][s]).abs());
        }
    }

    // Oracle criteria from the exact distribution.
    let eb = f64::exp(beta);
    let (li, lo) = (p.omega_in().ln(), p.omega_out().ln());
    let cavity_overlap: Vec<f64> = exact.same.iter().map(|&a| a / (eb * (1.0 - a) + a)).collect();
    let l = g.m() as f64;
    let mut bayes = 0.0;
    let mut gibbs = 0.0;
    let mut training = 0.0;
    for (k, &(i, j)) in g.edges().iter().enumerate() {
        let dd = ((g.degree(i) * g.degree(j)) as f64).ln();
        let s = cavity_overlap[k];
        bayes += dd + (p.omega_out() * (1.0 + (eb - 1.0) * s)).ln();
        gibbs += dd + s * li + (1.0 - s) * lo;
        training += dd + exact.same[k] * li + (1.0 - exact.same[k]) * lo;
    }
    let (bayes, gibbs, training) = (1.0 - bayes / l, 1.0 - gibbs / l, 1.0 - training / l);
    let coupling = p.omega_in() - p.omega_out();
    let mut non_edge = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if !g.has_edge(i, j) {
                let s: f64 = (0..q).map(|a| exact.marginals[i][a] * exact.marginals[j][a]).sum();
                non_edge += (g.degree(i) * g.degree(j)) as f64 * (coupling * s + p.omega_out());
            }
        }
    }
    let free_energy = -(exact.log_z + non_edge) / (beta * n as f64);

    let stats = PairStats::new(&g, &msgs, &p);
    let got = [
        ("bethe_f", bethe_free_energy(&g, &msgs, &marg, &p).map_err(|e| e.to_string())?, free_energy),
        ("e_bayes", e_bayes(&g, &stats).map_err(|e| e.to_string())?, bayes),
        ("e_gibbs", e_gibbs(&g, &msgs, &p), gibbs),
        ("e_training", e_training(&g, &stats, &p).map_err(|e| e.to_string())?, training),
    ];
    for (name, value, want) in got {
        let err = (value - want).abs();
        ensure(err < 1e-6, || format!("case {case} (n={n}, q={q}, beta={beta:.3}): {name} {value} vs {want}"))?;
        worst = worst.max(err);
    }
    ensure(worst < 1e-6, || format!("case {case}: marginal error {worst:e}"))?;
    Ok(worst)
}

fn tree_exactness() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        worst = worst.max(tree_case(case)?);
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("50 trees, largest deviation {worst:.2e}, {elapsed:.1?}"))
}

fn critical_temperatures() -> Outcome {
    let cases = [
        ("beta_star(2,4)", beta_star(2, 4.0), 3f64.ln()),
        ("beta_zero(2,4)", beta_zero(2, 4.0), (5.0f64 / 3.0).ln()),
        ("beta_star(2,9)", beta_star(2, 9.0), 2f64.ln()),
    ];
    for (name, got, want) in cases {
        let got = got.map_err(|e| e.to_string())?;
        ensure((got - want).abs() <= 1e-12, || format!("{name} = {got}, expected {want}"))?;
    }
    Ok("three reference values within 1e-12".into())
}

fn petersen() -> Graph {
    let mut e = Vec::new();
    for i in 0..5 {
        e.push((i, (i + 1) % 5));
        e.push((i, i + 5));
        e.push((i + 5, (i + 2) % 5 + 5));
    }
    Graph::from_edges(10, e).unwrap()
}

/// Random simple 3-regular graph by repeated pairing of half-edges.
fn random_cubic(n: usize, seed: u64) -> Graph {
    let mut r = rng(seed);
    loop {
        let mut stubs: Vec<usize> = (0..n).flat_map(|v| [v, v, v]).collect();
        stubs.shuffle(&mut r);
        let mut edges: Vec<(usize, usize)> = stubs.chunks(2).map(|c| (c[0].min(c[1]), c[0].max(c[1]))).collect();
        let simple = edges.iter().all(|(a, b)| a != b) && {
            edges.sort_unstable();
            edges.windows(2).all(|w| w[0] != w[1])
        };
        if simple {
            return Graph::from_edges(n, edges).unwrap();
        }
    }
}

/// Spectral radius of the 2N x 2N companion matrix `[[0, D - I], [-I, A]]`.
fn dense_nb_radius(g: &Graph) -> f64 {
    let n = g.n();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = g.degree(i) as f64 - 1.0;
        m[(n + i, i)] = -1.0;
    }
    for &(i, j) in g.edges() {
        m[(n + i, n + j)] = 1.0;
        m[(n + j, n + i)] = 1.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn dense_modularity_spectrum(g: &Graph) -> Vec<f64> {
    let n = g.n();
    let two_l = g.total_degree() as f64;
    let mut b = DMatrix::from_fn(n, n, |i, j| -((g.degree(i) * g.degree(j)) as f64) / two_l);
    for &(i, j) in g.edges() {
        b[(i, j)] += 1.0;
        b[(j, i)] += 1.0;
    }
    let mut v: Vec<f64> = SymmetricEigen::new(b).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

fn regular_spectra() -> Outcome {
    let mut graphs = vec![("petersen".to_string(), petersen())];
    for (k, n) in [20, 40, 60, 80, 100].into_iter().enumerate() {
        graphs.push((format!("cubic{n}"), random_cubic(n, 500 + k as u64)));
    }
    let mut worst_nb: f64 = 0.0;
    for (name, g) in &graphs {
        let dense = dense_nb_radius(g);
        let report = nb_eigs(g, 6).map_err(|e| e.to_string())?;
        let lead = report.eigenvalues[0];
        for (what, v) in [("dense", dense), ("krylov", lead)] {
            let err = (v - 2.0).abs();
            ensure(err < 1e-8, || format!("{name}: {what} rho = {v}"))?;
            worst_nb = worst_nb.max(err);
        }
    }

    let mut worst_mod: f64 = 0.0;
    let mut mod_graphs: Vec<(String, Graph)> = graphs;
    for (q, seed) in [(2usize, 61u64), (3, 62), (4, 63)] {
        let spec = SbmSpec::with_average_degree(200, q, 6.0, 0.2).map_err(|e| e.to_string())?;
        mod_graphs.push((format!("sbm200_q{q}"), generate_sbm(&spec, seed).map_err(|e| e.to_string())?.0));
    }
    let theta = power_law_propensities(180, 2.5, 1.0, 10.0, 64).map_err(|e| e.to_string())?;
    let spec = DcSbmSpec::with_average_degree(3, theta, 5.0, 0.2).map_err(|e| e.to_string())?;
    mod_graphs.push(("dcsbm180".into(), generate_dcsbm(&spec, 65).map_err(|e| e.to_string())?.0));
    for (name, g) in &mod_graphs {
        let dense = dense_modularity_spectrum(g);
        let report = modularity_eigs(g, 1.0, 8).map_err(|e| e.to_string())?;
        for (got, want) in report.eigenvalues.iter().zip(&dense) {
            let err = (got - want).abs();
            ensure(err < 1e-6, || format!("{name}: modularity eigenvalue {got} vs dense {want}"))?;
            worst_mod = worst_mod.max(err);
        }
    }
    Ok(format!(
        "rho(B)=2 on {} cubic graphs (max err {worst_nb:.1e}); modularity leading-k on {} graphs (max err {worst_mod:.1e})",
        6,
        mod_graphs.len()
    ))
}

/// Small fitted states with varied sizes, q and structure strength.
fn fitted_states(count: usize) -> Result<Vec<(Graph, sbmq::bp::EmResult)>, String> {
    let mut out = Vec::new();
    for k in 0..count {
        let q = 2 + k % 3;
        let n = 60 + 20 * (k % 4);
        let eps = [0.05, 0.15, 0.3, 0.6][k % 4];
        let spec = SbmSpec::with_average_degree(n, q, 6.0, eps).map_err(|e| e.to_string())?;
        let (g, _) = generate_sbm(&spec, 900 + k as u64).map_err(|e| e.to_string())?;
        let cfg = EmConfig {
            restarts: 2,
            ..EmConfig::default()
        };
        let fit = em_fit(&g, q, &cfg, k as u64).map_err(|e| e.to_string())?;
        out.push((g, fit));
    }
    Ok(out)
}

fn criteria_invariance() -> Outcome {
    let states = fitted_states(20)?;
    let mut worst: f64 = 0.0;
    let mut worst_hard: f64 = 0.0;
    for (k, (g, fit)) in states.iter().enumerate() {
        let q = fit.q;
        let mut perm: Vec<usize> = (0..q).collect();
        perm.shuffle(&mut rng(k as u64));
        let msgs = fit.messages.permuted(&perm);
        let marg = fit.marginals.permuted(&perm);
        let p = &fit.params;
        let eval = |m: &Messages, mg: &sbmq::bp::Marginals| -> Result<Vec<f64>, String> {
            let stats = PairStats::new(g, m, p);
            let part = Partition::new(mg.argmax_labels(), q).map_err(|e| e.to_string())?;
            Ok(vec![
                bethe_free_energy(g, m, mg, p).map_err(|e| e.to_string())?,
                e_bayes(g, &stats).map_err(|e| e.to_string())?,
                e_gibbs(g, m, p),
                e_map(g, m, p),
                e_training(g, &stats, p).map_err(|e| e.to_string())?,
                modularity(g, &part, 1.0),
                map_equation_mdl(g, &part),
            ])
        };
        let a = eval(&fit.messages, &fit.marginals)?;
        let b = eval(&msgs, &marg)?;
        for (x, y) in a.iter().zip(&b) {
            let err = (x - y).abs();
            ensure(err <= 1e-12 * x.abs().max(1.0), || format!("state {k}: {x} vs {y} after relabeling"))?;
            worst = worst.max(err);
        }
        let hard = fit.messages.hardened();
        let (gi, ma) = (e_gibbs(g, &hard, p), e_map(g, &hard, p));
        ensure((gi - ma).abs() <= 1e-12, || format!("state {k}: hard e_gibbs {gi} vs e_map {ma}"))?;
        worst_hard = worst_hard.max((gi - ma).abs());
    }
    Ok(format!(
        "20 states, relabeling deviation {worst:.1e}, hard gibbs-map gap {worst_hard:.1e}"
    ))
}

fn factorized_fixed_point() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..10u64 {
        let mut r = rng(derive(333, &[k]));
        let q = 2 + (k as usize) % 4;
        let g = if k % 2 == 0 {
            let spec = SbmSpec::with_average_degree(300, q, r.gen_range(3.0..10.0), 0.3).unwrap();
            generate_sbm(&spec, k).unwrap().0
        } else {
            let theta = power_law_propensities(300, 2.5, 1.0, 10.0, k).unwrap();
            let spec = DcSbmSpec::with_average_degree(q, theta, r.gen_range(3.0..8.0), 0.3).unwrap();
            generate_dcsbm(&spec, k).unwrap().0
        };
        let two_l = g.total_degree() as f64;
        let omega_out = r.gen_range(0.5..2.0) / two_l;
        let p = ModelParams::new(omega_out * r.gen_range(1.5..20.0), omega_out, two_l).unwrap();
        let mut msgs = Messages::uniform(&g, q);
        let mut marg = compute_marginals(&g, &p, &msgs).map_err(|e| e.to_string())?;
        for _ in 0..100 {
            bp_sweep(&g, &p, &mut msgs, &mut marg, 0.0, false, &mut r).map_err(|e| e.to_string())?;
        }
        let u = 1.0 / q as f64;
        for e in 0..msgs.len() {
            for &x in msgs.get(e) {
                worst = worst.max((x - u).abs());
            }
        }
        worst = worst.max(marg.max_deviation_from_uniform());
        ensure(worst <= 1e-12, || format!("graph {k}: deviation {worst:e}"))?;
    }
    Ok(format!("10 graphs x 100 sweeps, largest deviation {worst:.1e}"))
}

fn check_bundle(report: &SweepReport, label: &str) -> Result<usize, String> {
    let qs: Vec<usize> = report.rows.iter().filter(|r| r.fit.is_some()).map(|r| r.q).collect();
    let bundle = build_bundle(report, &qs).map_err(|e| e.to_string())?;
    for (layer, &q) in bundle.layers.iter().zip(&qs) {
        let rows = report.rows[q - report.rows[0].q]
            .fit
            .as_ref()
            .and_then(|f| f.marginals.as_ref())
            .ok_or("marginals missing")?;
        for (i, row) in rows.iter().enumerate() {
            let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ensure(layer.significant[i] == (top > SIGNIFICANCE_THRESHOLD), || {
                format!("{label} q={q} vertex {i}: flag {} with max marginal {top}", layer.significant[i])
            })?;
        }
        let mut sizes = vec![0; layer.q];
        for &l in &layer.labels {
            sizes[l] += 1;
        }
        ensure(sizes == layer.sizes, || format!("{label} q={q}: cluster sizes disagree"))?;
    }
    for (link, pair) in bundle.links.iter().zip(bundle.layers.windows(2)) {
        let (a, b) = (&pair[0], &pair[1]);
        let mut out_flow = vec![0; a.q];
        let mut in_flow = vec![0; b.q];
        for f in &link.flows {
            out_flow[f.from_cluster] += f.size;
            in_flow[f.to_cluster] += f.size;
            let sig = (0..a.labels.len())
                .filter(|&i| a.labels[i] == f.from_cluster && b.labels[i] == f.to_cluster)
                .filter(|&i| a.significant[i] && b.significant[i])
                .count();
            ensure(sig == f.significant_size, || format!("{label}: significant flow count mismatch"))?;
        }
        ensure(out_flow == a.sizes && in_flow == b.sizes, || {
            format!("{label} {}->{}: flows not conserved", link.q_from, link.q_to)
        })?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    export_alluvial(&bundle, dir.path()).map_err(|e| e.to_string())?;
    let back = read_alluvial(dir.path()).map_err(|e| e.to_string())?;
    ensure(back == bundle, || format!("{label}: files do not round-trip"))?;
    Ok(bundle.links.len())
}

fn alluvial_conservation() -> Outcome {
    let mut checked = Vec::new();
    let mut inputs: Vec<(String, Graph, usize)> = Vec::new();
    for name in ["karate", "lesmis", "football"] {
        let path = fixture(name).ok_or(format!("{name} fixture missing"))?;
        inputs.push((name.into(), load_edge_list(&path).map_err(|e| e.to_string())?, 5));
    }
    let spec = SbmSpec::with_average_degree(600, 3, 8.0, 0.1).map_err(|e| e.to_string())?;
    inputs.push(("sbm600".into(), generate_sbm(&spec, 7).map_err(|e| e.to_string())?.0, 5));
    for (name, g, q_max) in inputs {
        let cfg = SweepConfig {
            q_max: Some(q_max),
            seed: 3,
            spectral: false,
            greedy_runs: 0,
            keep_marginals: true,
            em: EmConfig {
                restarts: 2,
                ..EmConfig::default()
            },
            ..SweepConfig::default()
        };
        let report = sweep(&g, &cfg, None).map_err(|e| e.to_string())?;
        let links = check_bundle(&report, &name)?;
        // Advisory selection stays within the swept range.
        for c in Criterion::ALL {
            if let Some(q) = select_q(&report.rows, c, Rule::Argopt).map_err(|e| e.to_string())?.q {
                ensure((1..=q_max).contains(&q), || format!("{name}: selection {q} outside range"))?;
            }
        }
        checked.push(format!("{name} ({links} links)"));
    }
    Ok(checked.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("spectral table: karate, dolphins, football, political books", spectral_table),
        ("greedy overfit", greedy_overfit),
        ("strong-structure retrieval", strong_retrieval),
        ("BP tree exactness", tree_exactness),
        ("critical temperature formulas", critical_temperatures),
        ("regular-graph spectral oracle", regular_spectra),
        ("criteria permutation invariance, hard gibbs == map", criteria_invariance),
        ("factorized fixed point", factorized_fixed_point),
        ("alluvial conservation and significance", alluvial_conservation),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.1}s): {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
