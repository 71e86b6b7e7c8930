//! Greedy baselines: Louvain-style modularity maximization and a two-level
//! map-equation greedy, both with local moves followed by aggregation.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criteria::{map_equation_mdl, modularity};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::partition::Partition;
use crate::rng::{derive, rng, Rng};

const GAIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreedyMethod {
    Louvain,
    Infomap,
}

impl std::str::FromStr for GreedyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "louvain" => Ok(GreedyMethod::Louvain),
            "infomap" => Ok(GreedyMethod::Infomap),
            other => Err(Error::InvalidArgument(format!(
                "unknown greedy method `{other}` (expected louvain or infomap)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyResult {
    pub partition: Partition,
    /// Modularity for Louvain, codelength in bits for the map equation.
    pub objective: f64,
    pub q_star: usize,
    /// Local-move passes summed over all levels.
    pub passes: usize,
    pub levels: usize,
    pub seed: u64,
}

/// Weighted graph of supernodes. `loops[u]` is twice the weight inside `u`,
/// so `strength[u] = loops[u] + sum of adjacent weights`.
#[derive(Debug, Clone)]
struct WGraph {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
    strength: Vec<f64>,
    two_m: f64,
    /// Partition-independent parts of the objectives, fixed by the original graph.
    deg_sq_sum: f64,
    node_entropy: f64,
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

impl WGraph {
    fn from_graph(g: &Graph) -> Self {
        let two_m = g.total_degree() as f64;
        let adj = (0..g.n())
            .map(|i| g.neighbors(i).iter().map(|&j| (j, 1.0)).collect())
            .collect();
        let strength: Vec<f64> = g.degrees().map(|d| d as f64).collect();
        WGraph {
            adj,
            loops: vec![0.0; g.n()],
            deg_sq_sum: strength.iter().map(|d| d * d).sum(),
            node_entropy: strength.iter().map(|&d| plogp(d / two_m)).sum(),
            strength,
            two_m,
        }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    /// Collapses each community into a supernode.
    fn aggregate(&self, comm: &[usize], k: usize) -> WGraph {
        let mut loops = vec![0.0; k];
        let mut strength = vec![0.0; k];
        let mut acc: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
        for u in 0..self.n() {
            let cu = comm[u];
            loops[cu] += self.loops[u];
            strength[cu] += self.strength[u];
            for &(v, w) in &self.adj[u] {
                let cv = comm[v];
                if cu == cv {
                    loops[cu] += w;
                } else {
                    *acc[cu].entry(cv).or_insert(0.0) += w;
                }
            }
        }
        WGraph {
            adj: acc.into_iter().map(|m| m.into_iter().collect()).collect(),
            loops,
            strength,
            two_m: self.two_m,
            deg_sq_sum: self.deg_sq_sum,
            node_entropy: self.node_entropy,
        }
    }

    /// Modularity with the `i < j` convention for a supernode partition.
    #[cfg(test)]
    fn modularity(&self, comm: &[usize], k: usize, alpha: f64) -> f64 {
        let mut internal = vec![0.0; k];
        let mut tot = vec![0.0; k];
        for u in 0..self.n() {
            internal[comm[u]] += self.loops[u];
            tot[comm[u]] += self.strength[u];
            for &(v, w) in &self.adj[u] {
                if comm[v] == comm[u] {
                    internal[comm[u]] += w;
                }
            }
        }
        // `internal` holds twice the internal weight.
        let e: f64 = internal.iter().sum::<f64>() / 2.0;
        let d2: f64 = tot.iter().map(|t| t * t).sum();
        (e - alpha * (d2 - self.deg_sq_sum) / (2.0 * self.two_m)) / self.two_m
    }

    fn exits_and_volumes(&self, comm: &[usize], k: usize) -> (Vec<f64>, Vec<f64>) {
        let mut exit = vec![0.0; k];
        let mut vol = vec![0.0; k];
        for u in 0..self.n() {
            vol[comm[u]] += self.strength[u];
            for &(v, w) in &self.adj[u] {
                if comm[v] != comm[u] {
                    exit[comm[u]] += w;
                }
            }
        }
        (exit, vol)
    }

    #[cfg(test)]
    fn codelength(&self, comm: &[usize], k: usize) -> f64 {
        let (exit, vol) = self.exits_and_volumes(comm, k);
        codelength_from(&exit, &vol, self.two_m, self.node_entropy)
    }
}

#[cfg(test)]
fn codelength_from(exit: &[f64], vol: &[f64], two_m: f64, node_entropy: f64) -> f64 {
    let total: f64 = exit.iter().sum::<f64>() / two_m;
    let mut len = plogp(total) - node_entropy;
    for (e, v) in exit.iter().zip(vol) {
        len += plogp((e + v) / two_m) - 2.0 * plogp(e / two_m);
    }
    len
}

/// Scratch accumulator of weights from one node to neighbouring communities.
struct NeighborWeights {
    weight: Vec<f64>,
    touched: Vec<usize>,
}

impl NeighborWeights {
    fn new(k: usize) -> Self {
        NeighborWeights {
            weight: vec![0.0; k],
            touched: Vec::new(),
        }
    }

    fn collect(&mut self, g: &WGraph, comm: &[usize], u: usize) {
        for &c in &self.touched {
            self.weight[c] = 0.0;
        }
        self.touched.clear();
        for &(v, w) in &g.adj[u] {
            let c = comm[v];
            if self.weight[c] == 0.0 {
                self.touched.push(c);
            }
            self.weight[c] += w;
        }
    }
}

trait Objective {
    /// Prepares per-community totals for `comm`.
    fn init(&mut self, g: &WGraph, comm: &[usize]);
    /// Best target for `u` (currently in `comm[u]`), or `None` to stay.
    fn best_move(&self, g: &WGraph, u: usize, from: usize, nw: &NeighborWeights) -> Option<usize>;
    fn apply_move(&mut self, g: &WGraph, u: usize, from: usize, to: usize, nw: &NeighborWeights);
}

struct ModularityObjective {
    alpha: f64,
    tot: Vec<f64>,
}

impl Objective for ModularityObjective {
    fn init(&mut self, g: &WGraph, comm: &[usize]) {
        self.tot = vec![0.0; g.n()];
        for u in 0..g.n() {
            self.tot[comm[u]] += g.strength[u];
        }
    }

    fn best_move(&self, g: &WGraph, u: usize, from: usize, nw: &NeighborWeights) -> Option<usize> {
        let k = g.strength[u];
        let scale = self.alpha * k / g.two_m;
        // Gain of joining community c after leaving `from`, up to a shared constant.
        let gain = |c: usize, tot: f64| nw.weight[c] - scale * tot;
        let stay = gain(from, self.tot[from] - k);
        let mut best = None;
        let mut best_gain = stay + GAIN_EPS;
        for &c in &nw.touched {
            if c == from {
                continue;
            }
            let gc = gain(c, self.tot[c]);
            if gc > best_gain {
                best_gain = gc;
                best = Some(c);
            }
        }
        best
    }

    fn apply_move(&mut self, g: &WGraph, u: usize, from: usize, to: usize, _: &NeighborWeights) {
        self.tot[from] -= g.strength[u];
        self.tot[to] += g.strength[u];
    }
}

struct MapObjective {
    exit: Vec<f64>,
    vol: Vec<f64>,
    // Running sums over modules of exit/2L, plogp(exit/2L) and plogp((exit+vol)/2L).
    sum_exit: f64,
    sum_plogp_exit: f64,
    sum_plogp_total: f64,
}

impl MapObjective {
    fn new() -> Self {
        MapObjective {
            exit: Vec::new(),
            vol: Vec::new(),
            sum_exit: 0.0,
            sum_plogp_exit: 0.0,
            sum_plogp_total: 0.0,
        }
    }

    fn length(sum_exit: f64, sum_plogp_exit: f64, sum_plogp_total: f64) -> f64 {
        plogp(sum_exit) - 2.0 * sum_plogp_exit + sum_plogp_total
    }

    /// New (exit, vol) of `from` and `to` after moving `u`.
    fn moved(&self, g: &WGraph, u: usize, from: usize, to: usize, nw: &NeighborWeights) -> [(f64, f64); 2] {
        let out_u = g.strength[u] - g.loops[u];
        let k = g.strength[u];
        [
            (self.exit[from] - out_u + 2.0 * nw.weight[from], self.vol[from] - k),
            (self.exit[to] + out_u - 2.0 * nw.weight[to], self.vol[to] + k),
        ]
    }

    fn delta(&self, g: &WGraph, u: usize, from: usize, to: usize, nw: &NeighborWeights) -> f64 {
        let t = g.two_m;
        let new = self.moved(g, u, from, to, nw);
        let mut se = self.sum_exit;
        let mut spe = self.sum_plogp_exit;
        let mut spt = self.sum_plogp_total;
        for (c, (e, v)) in [from, to].into_iter().zip(new) {
            se += (e - self.exit[c]) / t;
            spe += plogp(e / t) - plogp(self.exit[c] / t);
            spt += plogp((e + v) / t) - plogp((self.exit[c] + self.vol[c]) / t);
        }
        Self::length(se, spe, spt) - Self::length(self.sum_exit, self.sum_plogp_exit, self.sum_plogp_total)
    }
}

impl Objective for MapObjective {
    fn init(&mut self, g: &WGraph, comm: &[usize]) {
        let (exit, vol) = g.exits_and_volumes(comm, g.n());
        let t = g.two_m;
        self.sum_exit = exit.iter().sum::<f64>() / t;
        self.sum_plogp_exit = exit.iter().map(|e| plogp(e / t)).sum();
        self.sum_plogp_total = exit.iter().zip(&vol).map(|(e, v)| plogp((e + v) / t)).sum();
        self.exit = exit;
        self.vol = vol;
    }

    fn best_move(&self, g: &WGraph, u: usize, from: usize, nw: &NeighborWeights) -> Option<usize> {
        let mut best = None;
        let mut best_delta = -GAIN_EPS;
        for &c in &nw.touched {
            if c == from {
                continue;
            }
            let d = self.delta(g, u, from, c, nw);
            if d < best_delta {
                best_delta = d;
                best = Some(c);
            }
        }
        best
    }

    fn apply_move(&mut self, g: &WGraph, u: usize, from: usize, to: usize, nw: &NeighborWeights) {
        let t = g.two_m;
        let new = self.moved(g, u, from, to, nw);
        for (c, (e, v)) in [from, to].into_iter().zip(new) {
            self.sum_exit += (e - self.exit[c]) / t;
            self.sum_plogp_exit += plogp(e / t) - plogp(self.exit[c] / t);
            self.sum_plogp_total += plogp((e + v) / t) - plogp((self.exit[c] + self.vol[c]) / t);
            self.exit[c] = e;
            self.vol[c] = v;
        }
    }
}

/// Local moves from singletons until a full pass moves nothing. Returns the
/// community of every supernode and the number of passes.
fn local_moves(g: &WGraph, obj: &mut dyn Objective, rng: &mut Rng) -> (Vec<usize>, usize, bool) {
    let n = g.n();
    let mut comm: Vec<usize> = (0..n).collect();
    obj.init(g, &comm);
    let mut nw = NeighborWeights::new(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut passes = 0;
    let mut moved_any = false;
    loop {
        passes += 1;
        order.shuffle(rng);
        let mut moved = false;
        for &u in &order {
            nw.collect(g, &comm, u);
            let from = comm[u];
            if let Some(to) = obj.best_move(g, u, from, &nw) {
                obj.apply_move(g, u, from, to, &nw);
                comm[u] = to;
                moved = true;
            }
        }
        if !moved {
            break;
        }
        moved_any = true;
    }
    (comm, passes, moved_any)
}

/// Relabels to `0..k` in order of first appearance.
fn renumber(comm: &mut [usize]) -> usize {
    let mut map = vec![usize::MAX; comm.len()];
    let mut next = 0;
    for c in comm.iter_mut() {
        if map[*c] == usize::MAX {
            map[*c] = next;
            next += 1;
        }
        *c = map[*c];
    }
    next
}

struct Levels {
    membership: Vec<usize>,
    k: usize,
    passes: usize,
    levels: usize,
}

fn run_levels(g: &Graph, mut make: impl FnMut() -> Box<dyn Objective>, seed: u64) -> Result<Levels> {
    if g.m() == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut r = rng(seed);
    let mut wg = WGraph::from_graph(g);
    let mut membership: Vec<usize> = (0..g.n()).collect();
    let mut k = g.n();
    let mut passes = 0;
    let mut levels = 0;
    loop {
        let mut obj = make();
        let (mut comm, p, moved) = local_moves(&wg, obj.as_mut(), &mut r);
        passes += p;
        if !moved {
            break;
        }
        levels += 1;
        k = renumber(&mut comm);
        for m in membership.iter_mut() {
            *m = comm[*m];
        }
        wg = wg.aggregate(&comm, k);
    }
    Ok(Levels {
        membership,
        k,
        passes,
        levels,
    })
}

fn finish(g: &Graph, lv: Levels, seed: u64, objective: impl Fn(&Partition) -> f64) -> Result<GreedyResult> {
    let partition = Partition::new(lv.membership, lv.k.max(1))?;
    Ok(GreedyResult {
        objective: objective(&partition),
        q_star: partition.effective_q(),
        partition,
        passes: lv.passes,
        levels: lv.levels,
        seed,
    })
    .inspect(|r| {
        debug_assert_eq!(r.partition.len(), g.n());
    })
}

/// Louvain local moves and aggregation on the `alpha`-modularity.
pub fn louvain(g: &Graph, alpha: f64, seed: u64) -> Result<GreedyResult> {
    let lv = run_levels(
        g,
        || {
            Box::new(ModularityObjective {
                alpha,
                tot: Vec::new(),
            })
        },
        seed,
    )?;
    finish(g, lv, seed, |p| modularity(g, p, alpha))
}

/// The same scheme minimizing the two-level map-equation codelength.
pub fn infomap_two_level(g: &Graph, seed: u64) -> Result<GreedyResult> {
    let lv = run_levels(g, || Box::new(MapObjective::new()), seed)?;
    finish(g, lv, seed, |p| map_equation_mdl(g, p))
}

pub fn run_greedy(g: &Graph, method: GreedyMethod, alpha: f64, seed: u64) -> Result<GreedyResult> {
    match method {
        GreedyMethod::Louvain => louvain(g, alpha, seed),
        GreedyMethod::Infomap => infomap_two_level(g, seed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

impl Distribution {
    /// Summary with population standard deviation and linearly interpolated quantiles.
    pub fn of(values: &[f64]) -> Distribution {
        assert!(!values.is_empty());
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        let quantile = |p: f64| {
            let pos = p * (s.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
        };
        Distribution {
            mean,
            std,
            min: s[0],
            q25: quantile(0.25),
            median: quantile(0.5),
            q75: quantile(0.75),
            max: s[s.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyRun {
    pub seed: u64,
    pub q_star: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedySummary {
    pub method: GreedyMethod,
    pub alpha: f64,
    pub q_star: Distribution,
    pub objective: Distribution,
    pub runs: Vec<GreedyRun>,
}

/// `runs` independent runs with seeds `derive(seed, [run])`.
pub fn greedy_stats(g: &Graph, method: GreedyMethod, alpha: f64, runs: usize, seed: u64) -> Result<GreedySummary> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    let results: Vec<GreedyRun> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let s = derive(seed, &[r as u64]);
            run_greedy(g, method, alpha, s).map(|res| GreedyRun {
                seed: s,
                q_star: res.q_star,
                objective: res.objective,
            })
        })
        .collect::<Result<_>>()?;
    let qs: Vec<f64> = results.iter().map(|r| r.q_star as f64).collect();
    let objs: Vec<f64> = results.iter().map(|r| r.objective).collect();
    Ok(GreedySummary {
        method,
        alpha,
        q_star: Distribution::of(&qs),
        objective: Distribution::of(&objs),
        runs: results,
    })
}
