//! Sparse undirected simple graphs.
//!
//! Adjacency is stored in CSR form. Every undirected edge `{i, j}` appears
//! twice, once in the row of `i` and once in the row of `j`; the position of
//! `j` inside the row of `i` is the *directed edge id* of `i -> j`, and
//! [`Graph::reverse`] maps it to the id of `j -> i`. Message passing indexes
//! its per-edge state by these ids.

use std::collections::{HashMap, VecDeque};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    reverse: Vec<usize>,
    /// Undirected edge id of each directed edge.
    undirected: Vec<usize>,
    /// Undirected edges `(i, j)` with `i < j`, sorted.
    edges: Vec<(usize, usize)>,
    /// Directed edge id of `i -> j` for each undirected edge `(i, j)`.
    forward: Vec<usize>,
    original_ids: Vec<u64>,
}

impl Graph {
    /// Builds a simple graph on `n` vertices. Self-loops are dropped and
    /// duplicate edges (in either orientation) collapsed.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Self::with_original_ids(edges, (0..n as u64).collect())
    }

    fn with_original_ids<I>(edges: I, original_ids: Vec<u64>) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let n = original_ids.len();
        let mut list = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{n}"
                )));
            }
            if u != v {
                list.push((u.min(v), u.max(v)));
            }
        }
        list.sort_unstable();
        list.dedup();

        let mut degree = vec![0usize; n];
        for &(u, v) in &list {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }

        let total = offsets[n];
        let mut targets = vec![0usize; total];
        let mut reverse = vec![0usize; total];
        let mut undirected = vec![0usize; total];
        let mut forward = vec![0usize; list.len()];
        let mut fill = offsets[..n].to_vec();
        let mut by_row: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (idx, &(u, v)) in list.iter().enumerate() {
            by_row[u].push((v, idx));
            by_row[v].push((u, idx));
        }
        let mut slot_of = vec![(0usize, 0usize); list.len()];
        for (i, row) in by_row.iter_mut().enumerate() {
            row.sort_unstable();
            for &(j, idx) in row.iter() {
                let e = fill[i];
                fill[i] += 1;
                targets[e] = j;
                undirected[e] = idx;
                if i < j {
                    slot_of[idx].0 = e;
                } else {
                    slot_of[idx].1 = e;
                }
            }
        }
        for (idx, &(a, b)) in slot_of.iter().enumerate() {
            reverse[a] = b;
            reverse[b] = a;
            forward[idx] = a;
        }

        Ok(Graph {
            offsets,
            targets,
            reverse,
            undirected,
            edges: list,
            forward,
            original_ids,
        })
    }

    /// Number of vertices `N`.
    pub fn n(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Number of undirected edges `L`.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// `2L`, the sum of all degrees.
    pub fn total_degree(&self) -> usize {
        self.targets.len()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.offsets.windows(2).map(|w| w[1] - w[0])
    }

    pub fn average_degree(&self) -> f64 {
        if self.n() == 0 {
            0.0
        } else {
            self.total_degree() as f64 / self.n() as f64
        }
    }

    /// Sorted neighbours of `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    /// Directed edge ids leaving `i`, aligned with [`Graph::neighbors`].
    pub fn out_edges(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn num_directed(&self) -> usize {
        self.targets.len()
    }

    /// Head vertex of directed edge `e`.
    pub fn target(&self, e: usize) -> usize {
        self.targets[e]
    }

    /// Id of the reversed directed edge.
    pub fn reverse(&self, e: usize) -> usize {
        self.reverse[e]
    }

    /// Undirected edge index of directed edge `e`.
    pub fn undirected_of(&self, e: usize) -> usize {
        self.undirected[e]
    }

    /// Undirected edges `(i, j)` with `i < j`, sorted lexicographically.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Directed edge id of `i -> j` for the `k`-th undirected edge `(i, j)`.
    pub fn forward_edge(&self, k: usize) -> usize {
        self.forward[k]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Id the vertex carried in the source this graph was built from.
    pub fn original_id(&self, i: usize) -> u64 {
        self.original_ids[i]
    }

    pub fn original_ids(&self) -> &[u64] {
        &self.original_ids
    }

    /// Edge set expressed in original ids, each pair ordered and the list sorted.
    pub fn original_edge_set(&self) -> Vec<(u64, u64)> {
        let mut out: Vec<(u64, u64)> = self
            .edges
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (self.original_ids[u], self.original_ids[v]);
                (a.min(b), a.max(b))
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Component label per vertex, numbered in order of smallest member index.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.n();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Induced subgraph on `keep` (sorted, distinct vertex indices). Original
    /// ids carry over.
    pub fn induced(&self, keep: &[usize]) -> Graph {
        let mut new_id = vec![usize::MAX; self.n()];
        for (k, &v) in keep.iter().enumerate() {
            new_id[v] = k;
        }
        let edges = self.edges.iter().filter(|&&(u, v)| new_id[u] != usize::MAX && new_id[v] != usize::MAX).map(|&(u, v)| (new_id[u], new_id[v]));
        let ids = keep.iter().map(|&v| self.original_ids[v]).collect();
        Graph::with_original_ids(edges, ids).expect("induced edges are in range")
    }

    /// Writes the graph as an edge list using original vertex ids.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "# N={} L={}", self.n(), self.m())?;
        for &(u, v) in &self.edges {
            writeln!(out, "{} {}", self.original_ids[u], self.original_ids[v])?;
        }
        Ok(())
    }

    pub fn save_edge_list(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_edge_list(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Parses an edge list: one edge per line as two whitespace-separated
/// non-negative integers, `#` starting a comment. Extra columns (weights,
/// timestamps) are ignored. Vertex ids are compacted to `0..N` in order of
/// first appearance.
pub fn parse_edge_list<R: BufRead>(reader: R) -> Result<Graph> {
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut ids: Vec<u64> = Vec::new();
    let mut edges = Vec::new();
    let mut intern = |raw: u64, ids: &mut Vec<u64>| -> usize {
        *index.entry(raw).or_insert_with(|| {
            ids.push(raw);
            ids.len() - 1
        })
    };
    for (lineno, line) in reader.lines().enumerate() {
        let line_no = lineno + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut fields = content.split_whitespace();
        let mut next_id = |what: &str| -> Result<u64> {
            let tok = fields.next().ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("missing {what} vertex id"),
            })?;
            tok.parse::<u64>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("`{tok}` is not a non-negative integer vertex id"),
            })
        };
        let a = next_id("source")?;
        let b = next_id("target")?;
        let u = intern(a, &mut ids);
        let v = intern(b, &mut ids);
        edges.push((u, v));
    }
    let graph = Graph::with_original_ids(edges, ids)?;
    if graph.m() == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(graph)
}

pub fn load_edge_list(path: &Path) -> Result<Graph> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(BufReader::new(file))
}

/// Induced subgraph on the largest connected component. Ties go to the
/// component holding the smallest original vertex id. The returned graph
/// keeps the original ids of its vertices.
pub fn largest_component(g: &Graph) -> Graph {
    let (label, count) = g.components();
    if count <= 1 {
        return g.clone();
    }
    let mut size = vec![0usize; count];
    let mut min_id = vec![u64::MAX; count];
    for (v, &c) in label.iter().enumerate() {
        size[c] += 1;
        min_id[c] = min_id[c].min(g.original_id(v));
    }
    let best = (0..count)
        .max_by(|&a, &b| size[a].cmp(&size[b]).then(min_id[b].cmp(&min_id[a])))
        .unwrap();
    let keep: Vec<usize> = (0..g.n()).filter(|&v| label[v] == best).collect();
    g.induced(&keep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Graph> {
        parse_edge_list(s.as_bytes())
    }

    #[test]
    fn triangle() {
        let g = parse("0 1\n1 2\n2 0").unwrap();
        assert_eq!((g.n(), g.m()), (3, 3));
        assert!(g.degrees().all(|d| d == 2));
    }

    #[test]
    fn sanitizes_loops_and_duplicates() {
        let g = parse("0 0\n0 1\n0 1").unwrap();
        assert_eq!((g.n(), g.m()), (2, 1));
    }

    #[test]
    fn reverse_edges_pair_up() {
        let g = parse("0 1\n1 2\n2 3\n3 0\n0 2\n# chord\n").unwrap();
        for i in 0..g.n() {
            for e in g.out_edges(i) {
                let r = g.reverse(e);
                assert_eq!(g.target(r), i);
                assert_eq!(g.reverse(r), e);
                assert_eq!(g.undirected_of(e), g.undirected_of(r));
            }
        }
        for (k, &(u, v)) in g.edges().iter().enumerate() {
            let e = g.forward_edge(k);
            assert_eq!(g.target(e), v);
            assert!(g.out_edges(u).contains(&e));
        }
        assert_eq!(g.degrees().sum::<usize>(), 2 * g.m());
    }

    #[test]
    fn first_appearance_compaction() {
        let g = parse("10 7\n7 3\n").unwrap();
        assert_eq!(g.original_ids(), &[10, 7, 3]);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 2) && !g.has_edge(0, 2));
    }

    #[test]
    fn parse_error_names_line() {
        match parse("0 1\n# ok\n2 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("5\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("-1 2\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(parse("# nothing\n"), Err(Error::EmptyGraph)));
        assert!(matches!(parse("3 3\n"), Err(Error::EmptyGraph)));
    }

    #[test]
    fn largest_component_cases() {
        let tri = parse("0 1\n1 2\n2 0").unwrap();
        assert_eq!(largest_component(&tri), tri);

        let g = parse("0 1\n1 2\n2 0\n5 6\n").unwrap();
        let c = largest_component(&g);
        assert_eq!((c.n(), c.m()), (3, 3));

        // Two equal components: keep the one holding the smallest original id.
        let g = parse("8 9\n9 7\n2 3\n3 4\n").unwrap();
        let c = largest_component(&g);
        assert_eq!(c.n(), 3);
        assert!(c.original_ids().contains(&2));
    }

    #[test]
    fn write_then_reload_is_identical() {
        let g = parse("4 2\n2 9\n9 4\n9 1\n1 1\n").unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let h = parse_edge_list(&buf[..]).unwrap();
        assert_eq!((h.n(), h.m()), (g.n(), g.m()));
        assert_eq!(h.original_edge_set(), g.original_edge_set());
    }
}
