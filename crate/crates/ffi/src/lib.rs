//! C interface to `sbmq`.
//!
//! Objects cross the boundary as opaque handles created by `sbmq_*_new`,
//! `sbmq_*_load` or `sbmq_em_fit` and released with the matching `*_free`.
//! Every fallible call returns an [`SbmqStatus`]; on failure the message is
//! available from [`sbmq_last_error`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use sbmq::bp::{beta_star, beta_zero, em_fit, EmConfig, EmResult};
use sbmq::criteria::evaluate;
use sbmq::generators::{generate_sbm, SbmSpec};
use sbmq::graph::load_edge_list;
use sbmq::greedy::{run_greedy, GreedyMethod};
use sbmq::spectral::{modularity_eigs, nb_eigs};
use sbmq::{Error, Graph};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbmqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    EmptyGraph = 5,
    Numeric = 6,
    Undefined = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbmqMatrix {
    Modularity = 0,
    NonBacktracking = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbmqGreedyMethod {
    Louvain = 0,
    Infomap = 1,
}

/// EM settings; obtain defaults from [`sbmq_em_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SbmqEmOptions {
    pub restarts: usize,
    pub max_sweeps: usize,
    pub max_total_sweeps: usize,
    pub max_em_iters: usize,
    pub msg_tol: f64,
    pub param_tol: f64,
    pub noise: f64,
    pub damping: f64,
    /// Nonzero keeps alpha = 1 and beta = beta*.
    pub frozen_params: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbmqParams {
    pub omega_in: f64,
    pub omega_out: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Assessment criteria of a fitted state. `bethe_f` is NaN when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbmqCriteria {
    pub q_effective: usize,
    pub bethe_f: f64,
    pub modularity: f64,
    pub mdl: f64,
    pub e_bayes: f64,
    pub e_gibbs: f64,
    pub e_map: f64,
    pub e_training: f64,
    pub factorized: i32,
}

/// Opaque graph handle.
pub struct SbmqGraph(Graph);

/// Opaque fitted-state handle.
pub struct SbmqFit(EmResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SbmqStatus {
    match e {
        Error::Io { .. } => SbmqStatus::Io,
        Error::Parse { .. } | Error::Serialization(_) => SbmqStatus::Parse,
        Error::EmptyGraph => SbmqStatus::EmptyGraph,
        Error::InvalidArgument(_) | Error::Domain(_) => SbmqStatus::InvalidArgument,
        Error::Undefined(_) => SbmqStatus::Undefined,
        _ => SbmqStatus::Numeric,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F>(f: F) -> SbmqStatus
where
    F: FnOnce() -> Result<(), (SbmqStatus, String)>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbmqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SbmqStatus::Panic
        }
    }
}

fn lib<T>(r: sbmq::Result<T>) -> Result<T, (SbmqStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (SbmqStatus, String) {
    (SbmqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (SbmqStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (SbmqStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn fill<T: Copy>(dst: *mut T, len: usize, src: &[T]) -> Result<(), (SbmqStatus, String)> {
    if dst.is_null() {
        return Err(null("output buffer"));
    }
    if len < src.len() {
        return Err((
            SbmqStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next `sbmq_*` call on the same thread.
#[no_mangle]
pub extern "C" fn sbmq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a graph on vertices `0..n` from `m` edges stored as
/// `edges[2k], edges[2k+1]`. Self-loops and duplicates are dropped.
///
/// # Safety
/// `edges` must point to `2 * m` readable values; `graph` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbmq_graph_new(n: usize, edges: *const usize, m: usize, graph: *mut *mut SbmqGraph) -> SbmqStatus {
    guard(|| {
        let slot = out(graph, "graph")?;
        if edges.is_null() && m > 0 {
            return Err(null("edges"));
        }
        let flat: &[usize] = if m == 0 { &[] } else { std::slice::from_raw_parts(edges, 2 * m) };
        let g = lib(Graph::from_edges(n, flat.chunks_exact(2).map(|e| (e[0], e[1]))))?;
        *slot = Box::into_raw(Box::new(SbmqGraph(g)));
        Ok(())
    })
}

/// Reads a whitespace-separated edge list.
///
/// # Safety
/// `path` must be a NUL-terminated string; `graph` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbmq_graph_load(path: *const c_char, graph: *mut *mut SbmqGraph) -> SbmqStatus {
    guard(|| {
        let slot = out(graph, "graph")?;
        let path = CStr::from_ptr(deref(path, "path")?)
            .to_str()
            .map_err(|_| (SbmqStatus::InvalidArgument, "path is not UTF-8".to_string()))?;
        let g = lib(load_edge_list(Path::new(path)))?;
        *slot = Box::into_raw(Box::new(SbmqGraph(g)));
        Ok(())
    })
}

/// Samples an SBM with `q` equal clusters, average degree `c` and
/// `eps = omega_out / omega_in`. When `labels` is non-null it receives the
/// planted label of each of the `n` vertices.
///
/// # Safety
/// `graph` must be writable; `labels`, if non-null, must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn sbmq_generate_sbm(
    n: usize,
    q: usize,
    c: f64,
    eps: f64,
    seed: u64,
    graph: *mut *mut SbmqGraph,
    labels: *mut usize,
) -> SbmqStatus {
    guard(|| {
        let slot = out(graph, "graph")?;
        let spec = lib(SbmSpec::with_average_degree(n, q, c, eps))?;
        let (g, p) = lib(generate_sbm(&spec, seed))?;
        if !labels.is_null() {
            fill(labels, n, p.labels())?;
        }
        *slot = Box::into_raw(Box::new(SbmqGraph(g)));
        Ok(())
    })
}

/// # Safety
/// `graph` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sbmq_graph_free(graph: *mut SbmqGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn sbmq_graph_num_vertices(graph: *const SbmqGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `graph` must be a live handle or null (which yields 0).
#[no_mangle]
pub unsafe extern "C" fn sbmq_graph_num_edges(graph: *const SbmqGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.0.m())
}

#[no_mangle]
pub extern "C" fn sbmq_em_options_default() -> SbmqEmOptions {
    let d = EmConfig::default();
    SbmqEmOptions {
        restarts: d.restarts,
        max_sweeps: d.max_sweeps,
        max_total_sweeps: d.max_total_sweeps,
        max_em_iters: d.max_em_iters,
        msg_tol: d.msg_tol,
        param_tol: d.param_tol,
        noise: d.noise,
        damping: d.damping,
        frozen_params: i32::from(d.frozen_params),
    }
}

/// Best-of-restarts EM fit at `q` clusters. `options` may be null for defaults.
///
/// # Safety
/// `graph` must be live, `options` null or readable, `fit` writable.
#[no_mangle]
pub unsafe extern "C" fn sbmq_em_fit(
    graph: *const SbmqGraph,
    q: usize,
    options: *const SbmqEmOptions,
    seed: u64,
    fit: *mut *mut SbmqFit,
) -> SbmqStatus {
    guard(|| {
        let g = deref(graph, "graph")?;
        let slot = out(fit, "fit")?;
        let o = options.as_ref().copied().unwrap_or_else(|| sbmq_em_options_default());
        let cfg = EmConfig {
            restarts: o.restarts,
            max_sweeps: o.max_sweeps,
            max_total_sweeps: o.max_total_sweeps,
            max_em_iters: o.max_em_iters,
            msg_tol: o.msg_tol,
            param_tol: o.param_tol,
            noise: o.noise,
            damping: o.damping,
            frozen_params: o.frozen_params != 0,
            ..EmConfig::default()
        };
        let res = lib(em_fit(&g.0, q, &cfg, seed))?;
        *slot = Box::into_raw(Box::new(SbmqFit(res)));
        Ok(())
    })
}

/// # Safety
/// `fit` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sbmq_fit_free(fit: *mut SbmqFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// # Safety
/// `fit` must be live and `params` writable.
#[no_mangle]
pub unsafe extern "C" fn sbmq_fit_params(fit: *const SbmqFit, params: *mut SbmqParams) -> SbmqStatus {
    guard(|| {
        let f = &deref(fit, "fit")?.0;
        *out(params, "params")? = SbmqParams {
            omega_in: f.params.omega_in(),
            omega_out: f.params.omega_out(),
            alpha: f.params.alpha(),
            beta: f.params.beta(),
        };
        Ok(())
    })
}

/// Copies the `n * q` marginals, row-major by vertex.
///
/// # Safety
/// `fit` must be live and `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sbmq_fit_marginals(fit: *const SbmqFit, buf: *mut f64, len: usize) -> SbmqStatus {
    guard(|| {
        let f = &deref(fit, "fit")?.0;
        let flat: Vec<f64> = f.marginals.rows().concat();
        fill(buf, len, &flat)
    })
}

/// Copies the argmax label of each vertex.
///
/// # Safety
/// `fit` must be live and `buf` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sbmq_fit_labels(fit: *const SbmqFit, buf: *mut usize, len: usize) -> SbmqStatus {
    guard(|| {
        let f = &deref(fit, "fit")?.0;
        fill(buf, len, &f.marginals.argmax_labels())
    })
}

/// Scores a fit against the graph it was fitted on.
///
/// # Safety
/// Both handles must be live and `criteria` writable.
#[no_mangle]
pub unsafe extern "C" fn sbmq_fit_criteria(
    graph: *const SbmqGraph,
    fit: *const SbmqFit,
    criteria: *mut SbmqCriteria,
) -> SbmqStatus {
    guard(|| {
        let g = &deref(graph, "graph")?.0;
        let f = &deref(fit, "fit")?.0;
        if f.marginals.n() != g.n() {
            return Err((
                SbmqStatus::InvalidArgument,
                "fit belongs to a different graph".to_string(),
            ));
        }
        let r = lib(evaluate(g, f))?;
        *out(criteria, "criteria")? = SbmqCriteria {
            q_effective: r.q_effective,
            bethe_f: r.bethe_f.unwrap_or(f64::NAN),
            modularity: r.modularity,
            mdl: r.mdl_two_level,
            e_bayes: r.e_bayes,
            e_gibbs: r.e_gibbs,
            e_map: r.e_map,
            e_training: r.e_training,
            factorized: i32::from(r.factorized),
        };
        Ok(())
    })
}

/// Number of eigenvalues outside the bulk among the leading `k`.
///
/// # Safety
/// `graph` must be live and `q_star` writable.
#[no_mangle]
pub unsafe extern "C" fn sbmq_spectral_count(
    graph: *const SbmqGraph,
    matrix: SbmqMatrix,
    k: usize,
    q_star: *mut usize,
) -> SbmqStatus {
    guard(|| {
        let g = &deref(graph, "graph")?.0;
        let report = match matrix {
            SbmqMatrix::Modularity => lib(modularity_eigs(g, 1.0, k))?,
            SbmqMatrix::NonBacktracking => lib(nb_eigs(g, k))?,
        };
        *out(q_star, "q_star")? = report.q_star;
        Ok(())
    })
}

/// One greedy run. `labels` may be null; otherwise it receives `n` labels.
///
/// # Safety
/// `graph` must be live, `q_star` and `objective` writable, `labels` null or
/// able to hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn sbmq_greedy(
    graph: *const SbmqGraph,
    method: SbmqGreedyMethod,
    alpha: f64,
    seed: u64,
    q_star: *mut usize,
    objective: *mut f64,
    labels: *mut usize,
    len: usize,
) -> SbmqStatus {
    guard(|| {
        let g = &deref(graph, "graph")?.0;
        let m = match method {
            SbmqGreedyMethod::Louvain => GreedyMethod::Louvain,
            SbmqGreedyMethod::Infomap => GreedyMethod::Infomap,
        };
        let r = lib(run_greedy(g, m, alpha, seed))?;
        *out(q_star, "q_star")? = r.q_star;
        *out(objective, "objective")? = r.objective;
        if !labels.is_null() {
            fill(labels, len, r.partition.labels())?;
        }
        Ok(())
    })
}

/// Inverse temperature where the factorized state loses stability.
///
/// # Safety
/// `out_beta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbmq_beta_star(q: usize, c: f64, out_beta: *mut f64) -> SbmqStatus {
    guard(|| {
        *out(out_beta, "out_beta")? = lib(beta_star(q, c))?;
        Ok(())
    })
}

/// Lower end of the reference band of inverse temperatures.
///
/// # Safety
/// `out_beta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sbmq_beta_zero(q: usize, c: f64, out_beta: *mut f64) -> SbmqStatus {
    guard(|| {
        *out(out_beta, "out_beta")? = lib(beta_zero(q, c))?;
        Ok(())
    })
}
