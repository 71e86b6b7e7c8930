//! Command-line front end. Flags override the `--config` file, which
//! overrides the defaults in [`crate::config`].

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::alluvial::{build_bundle, export_alluvial};
use crate::bp::{em_fit, EmSummary};
use crate::config::Config;
use crate::criteria::{evaluate, CriteriaRecord};
use crate::error::{Error, Result};
use crate::generators::{generate_dcsbm, generate_sbm, power_law_propensities, DcSbmSpec, SbmSpec};
use crate::graph::{load_edge_list, Graph};
use crate::greedy::{greedy_stats, run_greedy, GreedyMethod};
use crate::harness::{sweep, Criterion, Rule, SweepConfig, SweepReport};
use crate::partition::Partition;
use crate::rng::derive;
use crate::spectral::{default_k, modularity_eigs, modularity_spectrum_histogram, nb_eigs, SpectralReport};

fn with_default(help: &str, default: impl std::fmt::Display) -> String {
    format!("{help} [default: {default}]")
}

#[derive(Debug, Parser)]
#[command(name = "sbmq", version, about = "Estimate the number of communities in a network")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    #[arg(long, global = true, help = with_default("Random seed, echoed into every output", 0))]
    pub seed: Option<u64>,
    #[arg(long, global = true, help = with_default("Worker threads", "available parallelism"))]
    pub jobs: Option<usize>,
    #[arg(long, global = true, help = with_default("TOML file overriding the built-in defaults", "none"))]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, help = with_default("Keep alpha = 1 and beta = beta* instead of learning them", false))]
    pub frozen_params: bool,
    #[arg(long, global = true, help = with_default("Directory for output files", "."))]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Sbm,
    Dcsbm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatrixArg {
    Mod,
    Nb,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Louvain,
    Infomap,
}

impl From<MethodArg> for GreedyMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Louvain => GreedyMethod::Louvain,
            MethodArg::Infomap => GreedyMethod::Infomap,
        }
    }
}

/// EM settings shared by `infer` and `sweep`.
#[derive(Debug, Args)]
pub struct EmArgs {
    #[arg(long, help = with_default("Independent EM restarts per q", 5))]
    pub restarts: Option<usize>,
    #[arg(long, help = with_default("BP sweep budget per E step", 500))]
    pub max_sweeps: Option<usize>,
    #[arg(long, help = with_default("BP sweep budget per EM run", 1000))]
    pub max_total_sweeps: Option<usize>,
    #[arg(long, help = with_default("BP message convergence tolerance", 1e-6))]
    pub tol: Option<f64>,
    #[arg(long, help = with_default("Relative affinity change that stops EM", 1e-5))]
    pub param_tol: Option<f64>,
    #[arg(long, help = with_default("Message damping in [0, 1)", 0))]
    pub damping: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a planted-partition graph; writes edges.txt and labels.txt
    Generate {
        #[arg(long, value_enum, default_value_t = Model::Sbm)]
        model: Model,
        #[arg(long, help = "Number of vertices")]
        n: usize,
        #[arg(long, help = "Number of planted clusters")]
        q: usize,
        #[arg(long, help = "Target average degree")]
        c: f64,
        #[arg(long, help = with_default("Affinity ratio omega_out / omega_in", 0.5))]
        eps: Option<f64>,
        #[arg(long, help = with_default("Power-law exponent of the propensities (dcsbm)", 2.5))]
        exponent: Option<f64>,
        #[arg(long, help = with_default("Upper propensity cutoff (dcsbm)", 10))]
        theta_max: Option<f64>,
    },
    /// Fit the model at one q; writes infer_q{q}.json and labels_q{q}.txt
    Infer {
        #[arg(long, help = "Edge list file")]
        input: PathBuf,
        #[arg(long, help = "Number of clusters")]
        q: usize,
        #[command(flatten)]
        em: EmArgs,
    },
    /// Fit and score a range of q; writes sweep.csv and sweep.json
    Sweep {
        #[arg(long, help = "Edge list file")]
        input: PathBuf,
        #[arg(long, help = with_default("Smallest q", 1))]
        qmin: Option<usize>,
        #[arg(long, help = with_default("Largest q", "min(30, N/10)"))]
        qmax: Option<usize>,
        #[command(flatten)]
        em: EmArgs,
        #[arg(long, help = with_default("Greedy baseline runs per method (0 skips them)", 10))]
        greedy_runs: Option<usize>,
        #[arg(long, help = with_default("Skip the spectral columns", false))]
        no_spectral: bool,
        #[arg(long, help = with_default("Eigenvalues sought per matrix", "min(N/2, 2 qmax + 10)"))]
        k: Option<usize>,
        #[arg(long, help = with_default("Store marginals in sweep.json (needed by `alluvial`)", false))]
        keep_marginals: bool,
    },
    /// Count eigenvalues outside the random bulk; writes spectral.json
    Spectral {
        #[arg(long, help = "Edge list file")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MatrixArg::Both)]
        matrix: MatrixArg,
        #[arg(long, help = with_default("Eigenvalues sought", "min(N/2, 2 * 10 + 10)"))]
        k: Option<usize>,
        #[arg(long, help = with_default("Resolution of the modularity matrix", 1))]
        alpha: Option<f64>,
        #[arg(long, help = with_default("Also write the full modularity spectrum histogram", false))]
        histogram: bool,
        #[arg(long, help = with_default("Histogram bins", 50))]
        bins: Option<usize>,
    },
    /// Greedy modularity or map-equation baseline; writes greedy_{method}.json
    Greedy {
        #[arg(long, help = "Edge list file")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::Louvain)]
        method: MethodArg,
        #[arg(long, help = with_default("Independent runs", 30))]
        runs: Option<usize>,
        #[arg(long, help = with_default("Modularity resolution (louvain)", 1))]
        alpha: Option<f64>,
    },
    /// Alluvial map and flow files from a sweep run with --keep-marginals
    Alluvial {
        #[arg(long, help = "sweep.json written by `sweep --keep-marginals`")]
        report: PathBuf,
        #[arg(long, value_delimiter = ',', help = with_default("Values of q, comma separated", "every q with marginals"))]
        qs: Vec<usize>,
        #[arg(long, help = with_default("Edge list used for the sweep, to restore vertex ids", "none"))]
        input: Option<PathBuf>,
    },
}

fn apply_em(cfg: &mut Config, em: &EmArgs, frozen: bool) {
    let e = &mut cfg.em;
    e.restarts = em.restarts.unwrap_or(e.restarts);
    e.max_sweeps = em.max_sweeps.unwrap_or(e.max_sweeps);
    e.max_total_sweeps = em.max_total_sweeps.unwrap_or(e.max_total_sweeps);
    e.msg_tol = em.tol.unwrap_or(e.msg_tol);
    e.param_tol = em.param_tol.unwrap_or(e.param_tol);
    e.damping = em.damping.unwrap_or(e.damping);
    e.frozen_params |= frozen;
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
{
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// `<original id> <label>` per line, in internal vertex order.
fn write_labels(path: &Path, g: &Graph, p: &Partition) -> Result<()> {
    write_with(path, |w| {
        for (id, l) in g.original_ids().iter().zip(p.labels()) {
            writeln!(w, "{id} {l}")?;
        }
        Ok(())
    })
}

#[derive(Serialize)]
struct GenerateRecord<'a> {
    model: &'a str,
    seed: u64,
    n: usize,
    q: usize,
    c: f64,
    eps: f64,
    omega_in: f64,
    omega_out: f64,
    edges: usize,
}

#[derive(Serialize)]
struct InferRecord {
    input: String,
    seed: u64,
    fit: EmSummary,
    criteria: CriteriaRecord,
}

#[derive(Serialize)]
struct SpectralRecord {
    input: String,
    seed: u64,
    modularity: Option<SpectralReport>,
    non_backtracking: Option<SpectralReport>,
}

fn execute(cli: Cli) -> Result<()> {
    let g_args = cli.global;
    let mut cfg = match &g_args.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    cfg.seed = g_args.seed.unwrap_or(cfg.seed);
    let seed = cfg.seed;
    if let Some(jobs) = g_args.jobs.or(cfg.jobs) {
        if jobs == 0 {
            return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
        }
        // A pool may already exist when run() is called twice in one process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let out_dir = g_args.out_dir.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let mut stdout = std::io::stdout().lock();
    let mut say = |line: String| {
        let _ = writeln!(stdout, "{line}");
    };

    match cli.command {
        Command::Generate {
            model,
            n,
            q,
            c,
            eps,
            exponent,
            theta_max,
        } => {
            let eps = eps.unwrap_or(cfg.generate.eps);
            let (g, truth, omega_in, omega_out, name) = match model {
                Model::Sbm => {
                    let spec = SbmSpec::with_average_degree(n, q, c, eps)?;
                    let (g, p) = generate_sbm(&spec, seed)?;
                    (g, p, spec.omega_in, spec.omega_out, "sbm")
                }
                Model::Dcsbm => {
                    let exponent = exponent.unwrap_or(cfg.generate.exponent);
                    let hi = theta_max.unwrap_or(cfg.generate.theta_max);
                    let theta = power_law_propensities(n, exponent, 1.0, hi, derive(seed, &[1]))?;
                    let spec = DcSbmSpec::with_average_degree(q, theta, c, eps)?;
                    let (g, p) = generate_dcsbm(&spec, seed)?;
                    (g, p, spec.omega_in, spec.omega_out, "dcsbm")
                }
            };
            let edges = out_dir.join("edges.txt");
            g.save_edge_list(&edges)?;
            let labels = out_dir.join("labels.txt");
            write_with(&labels, |w| truth.write(w))?;
            write_json(
                &out_dir.join("generate.json"),
                &GenerateRecord {
                    model: name,
                    seed,
                    n,
                    q,
                    c,
                    eps,
                    omega_in,
                    omega_out,
                    edges: g.m(),
                },
            )?;
            say(format!("seed={seed} n={n} edges={}", g.m()));
            say(format!("wrote {} and {}", edges.display(), labels.display()));
        }
        Command::Infer { input, q, em } => {
            apply_em(&mut cfg, &em, g_args.frozen_params);
            let g = load_edge_list(&input)?;
            let fit = em_fit(&g, q, &cfg.em, seed)?;
            let criteria = evaluate(&g, &fit)?;
            let json = out_dir.join(format!("infer_q{q}.json"));
            write_json(
                &json,
                &InferRecord {
                    input: input.display().to_string(),
                    seed,
                    fit: fit.summary(true),
                    criteria,
                },
            )?;
            let labels = out_dir.join(format!("labels_q{q}.txt"));
            write_labels(&labels, &g, &Partition::new(fit.marginals.argmax_labels(), q)?)?;
            say(format!(
                "seed={seed} q={q} alpha={} beta={} bethe_f={} converged={} factorized={}",
                fit.params.alpha(),
                fit.params.beta(),
                fit.bethe_free_energy.map_or("undefined".into(), |f| f.to_string()),
                fit.converged,
                fit.factorized
            ));
            say(format!("wrote {} and {}", json.display(), labels.display()));
        }
        Command::Sweep {
            input,
            qmin,
            qmax,
            em,
            greedy_runs,
            no_spectral,
            k,
            keep_marginals,
        } => {
            apply_em(&mut cfg, &em, g_args.frozen_params);
            let g = load_edge_list(&input)?;
            let sc = SweepConfig {
                q_min: qmin.unwrap_or(cfg.sweep.q_min),
                q_max: qmax.or(cfg.sweep.q_max),
                em: cfg.em,
                seed,
                spectral: cfg.sweep.spectral && !no_spectral,
                spectral_k: k.or(cfg.spectral.k),
                greedy_runs: greedy_runs.unwrap_or(cfg.sweep.greedy_runs),
                greedy_alpha: cfg.greedy.alpha,
                keep_marginals: keep_marginals || cfg.sweep.keep_marginals,
            };
            let report = sweep(&g, &sc, Some(&input.display().to_string()))?;
            let csv = out_dir.join("sweep.csv");
            write_with(&csv, |w| report.write_csv(w))?;
            let json = out_dir.join("sweep.json");
            fs::write(&json, report.to_json()? + "\n").map_err(|e| Error::io(&json, e))?;
            say(format!("seed={seed} n={} l={}", g.n(), g.m()));
            for row in report.rows.iter().filter(|r| r.error.is_some()) {
                say(format!("q={} failed: {}", row.q, row.error.as_deref().unwrap_or("")));
            }
            for criterion in Criterion::ALL {
                let show = |rule| match report.selection(criterion, rule).and_then(|s| s.q) {
                    Some(q) => q.to_string(),
                    None => "undetermined".into(),
                };
                say(format!(
                    "{criterion:?}: argopt={} elbow={}",
                    show(Rule::Argopt),
                    show(Rule::Elbow(crate::harness::DEFAULT_ELBOW_DELTA))
                ));
            }
            if let Some(s) = &report.spectral {
                if let Some(m) = &s.modularity {
                    say(format!("spectral modularity q_star={}", m.q_star));
                }
                if let Some(b) = &s.non_backtracking {
                    say(format!("spectral non_backtracking q_star={}", b.q_star));
                }
            }
            say(format!("wrote {} and {}", csv.display(), json.display()));
        }
        Command::Spectral {
            input,
            matrix,
            k,
            alpha,
            histogram,
            bins,
        } => {
            let g = load_edge_list(&input)?;
            let k = k.or(cfg.spectral.k).unwrap_or_else(|| default_k(g.n(), 10));
            let alpha = alpha.unwrap_or(cfg.spectral.alpha);
            let modularity = matches!(matrix, MatrixArg::Mod | MatrixArg::Both)
                .then(|| modularity_eigs(&g, alpha, k))
                .transpose()?;
            let non_backtracking = matches!(matrix, MatrixArg::Nb | MatrixArg::Both)
                .then(|| nb_eigs(&g, k))
                .transpose()?;
            match (&modularity, &non_backtracking) {
                (Some(m), None) => say(format!("q_star={}", m.q_star)),
                (None, Some(b)) => say(format!("q_star={}", b.q_star)),
                (Some(m), Some(b)) => {
                    say(format!("modularity q_star={}", m.q_star));
                    say(format!("non_backtracking q_star={}", b.q_star));
                }
                (None, None) => unreachable!("at least one matrix is selected"),
            }
            if histogram {
                let h = modularity_spectrum_histogram(&g, alpha, bins.unwrap_or(cfg.spectral.histogram_bins))?;
                let path = out_dir.join("spectrum_hist.csv");
                write_with(&path, |w| h.write_csv(w))?;
                say(format!("wrote {}", path.display()));
            }
            let path = out_dir.join("spectral.json");
            write_json(
                &path,
                &SpectralRecord {
                    input: input.display().to_string(),
                    seed,
                    modularity,
                    non_backtracking,
                },
            )?;
            say(format!("wrote {}", path.display()));
        }
        Command::Greedy {
            input,
            method,
            runs,
            alpha,
        } => {
            let g = load_edge_list(&input)?;
            let method = GreedyMethod::from(method);
            let runs = runs.unwrap_or(cfg.greedy.runs);
            let alpha = alpha.unwrap_or(cfg.greedy.alpha);
            let summary = greedy_stats(&g, method, alpha, runs, seed)?;
            let name = match method {
                GreedyMethod::Louvain => "louvain",
                GreedyMethod::Infomap => "infomap",
            };
            let json = out_dir.join(format!("greedy_{name}.json"));
            write_json(&json, &summary)?;
            // Partition of the first run, reproducible from its recorded seed.
            let first = run_greedy(&g, method, alpha, summary.runs[0].seed)?;
            let labels = out_dir.join(format!("greedy_{name}_labels.txt"));
            write_labels(&labels, &g, &first.partition)?;
            say(format!(
                "seed={seed} runs={runs} q_star mean={} std={} median={}",
                summary.q_star.mean, summary.q_star.std, summary.q_star.median
            ));
            say(format!("wrote {} and {}", json.display(), labels.display()));
        }
        Command::Alluvial { report, qs, input } => {
            let text = fs::read_to_string(&report).map_err(|e| Error::io(&report, e))?;
            let rep = SweepReport::from_json(&text)?;
            let qs = if qs.is_empty() {
                rep.rows
                    .iter()
                    .filter(|r| r.fit.as_ref().is_some_and(|f| f.marginals.is_some()))
                    .map(|r| r.q)
                    .collect()
            } else {
                qs
            };
            let mut bundle = build_bundle(&rep, &qs)?;
            if let Some(path) = input {
                let g = load_edge_list(&path)?;
                bundle = bundle.with_vertex_ids(g.original_ids().to_vec())?;
            }
            let files = export_alluvial(&bundle, &out_dir)?;
            for f in files {
                say(format!("wrote {}", f.display()));
            }
        }
    }
    Ok(())
}

/// Parses `argv` and runs the selected subcommand, returning the process
/// exit code: 0 on success, 2 for usage errors, 3 for I/O and format
/// errors, 4 for numerical failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
