//! Multi-`q` partitions with per-vertex significance, laid out for
//! alluvial-diagram renderers.
//!
//! Files written by [`export_alluvial`]:
//!
//! * `map_q{q}.txt`, one per layer:
//!   ```text
//!   # alluvial map
//!   N <n> q <q>
//!   *Clusters
//!   <cluster> <size>          (one line per cluster, largest first)
//!   *Vertices
//!   <vertex id> <cluster> <max marginal> <significant 0|1>
//!   ```
//! * `flows.json`: `{"q_list": [...], "links": [{q_from, q_to, matching, flows:
//!   [{from_cluster, to_cluster, size, significant_size}]}]}`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::SweepReport;

/// A vertex is significant when its largest marginal strictly exceeds this.
pub const SIGNIFICANCE_THRESHOLD: f64 = 0.9;

pub const FLOW_FILE: &str = "flows.json";

pub fn map_file_name(q: usize) -> String {
    format!("map_q{q}.txt")
}

/// Hard partition at one `q`. Cluster 0 is the largest; empty clusters come last.
#[derive(Debug, Clone, PartialEq)]
pub struct AlluvialLayer {
    pub q: usize,
    pub labels: Vec<usize>,
    pub max_marginal: Vec<f64>,
    pub significant: Vec<bool>,
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flow {
    pub from_cluster: usize,
    pub to_cluster: usize,
    pub size: usize,
    /// Vertices of the flow significant in both layers.
    pub significant_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowLink {
    pub q_from: usize,
    pub q_to: usize,
    /// `(from_cluster, to_cluster)` pairs, injective on the smaller side.
    pub matching: Vec<(usize, usize)>,
    pub flows: Vec<Flow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlluvialBundle {
    pub vertex_ids: Vec<u64>,
    pub layers: Vec<AlluvialLayer>,
    pub links: Vec<FlowLink>,
}

#[derive(Serialize, Deserialize)]
struct FlowFile {
    q_list: Vec<usize>,
    links: Vec<FlowLink>,
}

/// Hard-assigns each row to its argmax, flags significance and relabels
/// clusters by decreasing size.
pub fn layer_from_marginals(q: usize, rows: &[Vec<f64>]) -> Result<AlluvialLayer> {
    let mut raw = Vec::with_capacity(rows.len());
    let mut max_marginal = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        if row.len() != q {
            return Err(Error::InvalidState(format!(
                "vertex {i} has {} marginal entries, expected {q}",
                row.len()
            )));
        }
        let (best, &p) = row
            .iter()
            .enumerate()
            .fold((0, &row[0]), |acc, (s, p)| if *p > *acc.1 { (s, p) } else { acc });
        raw.push(best);
        max_marginal.push(p);
    }
    let mut raw_sizes = vec![0usize; q];
    for &l in &raw {
        raw_sizes[l] += 1;
    }
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| raw_sizes[b].cmp(&raw_sizes[a]).then(a.cmp(&b)));
    let mut rank = vec![0; q];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    Ok(AlluvialLayer {
        q,
        labels: raw.iter().map(|&l| rank[l]).collect(),
        significant: max_marginal.iter().map(|&p| p > SIGNIFICANCE_THRESHOLD).collect(),
        max_marginal,
        sizes: order.iter().map(|&o| raw_sizes[o]).collect(),
    })
}

/// Greedy maximum-overlap matching: pairs are taken by decreasing overlap
/// until every cluster on the smaller side is matched.
fn link(a: &AlluvialLayer, b: &AlluvialLayer) -> FlowLink {
    let mut overlap = vec![vec![0usize; b.q]; a.q];
    let mut sig = vec![vec![0usize; b.q]; a.q];
    for i in 0..a.labels.len() {
        let (x, y) = (a.labels[i], b.labels[i]);
        overlap[x][y] += 1;
        if a.significant[i] && b.significant[i] {
            sig[x][y] += 1;
        }
    }
    let mut pairs: Vec<(usize, usize)> = (0..a.q).flat_map(|x| (0..b.q).map(move |y| (x, y))).collect();
    pairs.sort_by(|&(x1, y1), &(x2, y2)| overlap[x2][y2].cmp(&overlap[x1][y1]).then((x1, y1).cmp(&(x2, y2))));
    let (mut used_a, mut used_b) = (vec![false; a.q], vec![false; b.q]);
    let mut matching = Vec::new();
    for (x, y) in pairs {
        if matching.len() == a.q.min(b.q) {
            break;
        }
        if !used_a[x] && !used_b[y] {
            used_a[x] = true;
            used_b[y] = true;
            matching.push((x, y));
        }
    }
    matching.sort_unstable();
    let mut flows = Vec::new();
    for x in 0..a.q {
        for y in 0..b.q {
            if overlap[x][y] > 0 {
                flows.push(Flow {
                    from_cluster: x,
                    to_cluster: y,
                    size: overlap[x][y],
                    significant_size: sig[x][y],
                });
            }
        }
    }
    FlowLink {
        q_from: a.q,
        q_to: b.q,
        matching,
        flows,
    }
}

impl AlluvialBundle {
    pub fn from_layers(vertex_ids: Vec<u64>, layers: Vec<AlluvialLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("at least one q is needed".into()));
        }
        if vertex_ids.len() != layers[0].labels.len() || layers.iter().any(|l| l.labels.len() != vertex_ids.len()) {
            return Err(Error::InvalidState("layers disagree on the number of vertices".into()));
        }
        let links = layers.windows(2).map(|w| link(&w[0], &w[1])).collect();
        Ok(AlluvialBundle {
            vertex_ids,
            layers,
            links,
        })
    }

    pub fn n(&self) -> usize {
        self.vertex_ids.len()
    }

    /// Replaces the default `0..n` vertex ids, e.g. with the original ids of
    /// an edge-list file.
    pub fn with_vertex_ids(mut self, ids: Vec<u64>) -> Result<Self> {
        if ids.len() != self.n() {
            return Err(Error::InvalidArgument(format!(
                "{} vertex ids for {} vertices",
                ids.len(),
                self.n()
            )));
        }
        self.vertex_ids = ids;
        Ok(self)
    }
}

/// Builds the bundle for `q_list` (in the given order) from a sweep run with
/// retained marginals.
pub fn build_bundle(report: &SweepReport, q_list: &[usize]) -> Result<AlluvialBundle> {
    let layers = q_list
        .iter()
        .map(|&q| {
            let rows = report
                .rows
                .iter()
                .find(|r| r.q == q)
                .and_then(|r| r.fit.as_ref())
                .and_then(|f| f.marginals.as_ref())
                .ok_or(Error::MissingMarginals(q))?;
            layer_from_marginals(q, rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let ids = (0..report.network.n as u64).collect();
    AlluvialBundle::from_layers(ids, layers)
}

fn write_layer(path: &Path, ids: &[u64], layer: &AlluvialLayer) -> std::io::Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "# alluvial map")?;
    writeln!(out, "N {} q {}", ids.len(), layer.q)?;
    writeln!(out, "*Clusters")?;
    for (c, s) in layer.sizes.iter().enumerate() {
        writeln!(out, "{c} {s}")?;
    }
    writeln!(out, "*Vertices")?;
    for (i, id) in ids.iter().enumerate() {
        writeln!(
            out,
            "{id} {} {} {}",
            layer.labels[i],
            layer.max_marginal[i],
            u8::from(layer.significant[i])
        )?;
    }
    out.flush()
}

/// Writes one map file per layer and the flow file into `dir`, creating it
/// if needed. Returns the paths written.
pub fn export_alluvial(bundle: &AlluvialBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for layer in &bundle.layers {
        let path = dir.join(map_file_name(layer.q));
        write_layer(&path, &bundle.vertex_ids, layer).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    let flow = FlowFile {
        q_list: bundle.layers.iter().map(|l| l.q).collect(),
        links: bundle.links.clone(),
    };
    let path = dir.join(FLOW_FILE);
    let text = serde_json::to_string_pretty(&flow).map_err(|e| Error::Serialization(e.to_string()))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(line, format!("expected {what}")))
}

/// Parses one map file back into vertex ids and a layer.
pub fn read_map<R: BufRead>(reader: R) -> Result<(Vec<u64>, AlluvialLayer)> {
    #[derive(PartialEq)]
    enum Section {
        Header,
        Clusters,
        Vertices,
    }
    let mut section = Section::Header;
    let mut header: Option<(usize, usize)> = None;
    let mut sizes = BTreeMap::new();
    let (mut ids, mut labels, mut max_marginal, mut significant) = (vec![], vec![], vec![], vec![]);
    for (k, line) in reader.lines().enumerate() {
        let ln = k + 1;
        let line = line.map_err(|e| parse_err(ln, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line {
            "*Clusters" => section = Section::Clusters,
            "*Vertices" => section = Section::Vertices,
            _ => {
                let mut t = line.split_whitespace();
                match section {
                    Section::Header => {
                        if t.next() != Some("N") {
                            return Err(parse_err(ln, "expected `N <n> q <q>`"));
                        }
                        let n = field(t.next(), ln, "vertex count")?;
                        if t.next() != Some("q") {
                            return Err(parse_err(ln, "expected `q`"));
                        }
                        header = Some((n, field(t.next(), ln, "q")?));
                    }
                    Section::Clusters => {
                        let c: usize = field(t.next(), ln, "cluster id")?;
                        sizes.insert(c, field::<usize>(t.next(), ln, "cluster size")?);
                    }
                    Section::Vertices => {
                        ids.push(field(t.next(), ln, "vertex id")?);
                        labels.push(field(t.next(), ln, "cluster id")?);
                        max_marginal.push(field(t.next(), ln, "max marginal")?);
                        significant.push(match t.next() {
                            Some("1") => true,
                            Some("0") => false,
                            _ => return Err(parse_err(ln, "expected significance flag 0 or 1")),
                        });
                    }
                }
            }
        }
    }
    let (n, q) = header.ok_or_else(|| parse_err(0, "missing `N <n> q <q>` header"))?;
    if ids.len() != n || sizes.len() != q || sizes.keys().copied().ne(0..q) {
        return Err(parse_err(0, "map file sections disagree with its header"));
    }
    if labels.iter().any(|&l: &usize| l >= q) {
        return Err(parse_err(0, "cluster id out of range"));
    }
    Ok((
        ids,
        AlluvialLayer {
            q,
            labels,
            max_marginal,
            significant,
            sizes: sizes.into_values().collect(),
        },
    ))
}

/// Reads a directory written by [`export_alluvial`].
pub fn read_alluvial(dir: &Path) -> Result<AlluvialBundle> {
    let path = dir.join(FLOW_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let flow: FlowFile = serde_json::from_str(&text).map_err(|e| Error::Serialization(e.to_string()))?;
    let mut ids = None;
    let mut layers = Vec::new();
    for &q in &flow.q_list {
        let path = dir.join(map_file_name(q));
        let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        let (layer_ids, layer) = read_map(BufReader::new(file))?;
        if ids.get_or_insert_with(|| layer_ids.clone()) != &layer_ids {
            return Err(Error::InvalidState(format!("{} lists different vertices", path.display())));
        }
        layers.push(layer);
    }
    let bundle = AlluvialBundle::from_layers(ids.unwrap_or_default(), layers)?;
    if bundle.links != flow.links {
        return Err(Error::InvalidState("flow file does not match the map files".into()));
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hard(labels: &[usize], q: usize) -> Vec<Vec<f64>> {
        labels
            .iter()
            .map(|&l| (0..q).map(|s| if s == l { 0.95 } else { 0.05 / (q - 1) as f64 }).collect())
            .collect()
    }

    #[test]
    fn identical_partitions_flow_straight() {
        let a = layer_from_marginals(2, &hard(&[0, 0, 0, 1, 1], 2)).unwrap();
        let b = layer_from_marginals(3, &hard(&[0, 0, 0, 1, 1], 3)).unwrap();
        assert_eq!(b.sizes, vec![3, 2, 0]);
        let bundle = AlluvialBundle::from_layers((0..5).collect(), vec![a, b]).unwrap();
        let link = &bundle.links[0];
        assert_eq!(link.matching, vec![(0, 0), (1, 1)]);
        assert!(link.flows.iter().all(|f| f.from_cluster == f.to_cluster));
    }

    #[test]
    fn refinement_maps_two_into_one() {
        let a = layer_from_marginals(2, &hard(&[0, 0, 0, 0, 1, 1], 2)).unwrap();
        let b = layer_from_marginals(3, &hard(&[0, 0, 2, 2, 1, 1], 3)).unwrap();
        let bundle = AlluvialBundle::from_layers((0..6).collect(), vec![a, b]).unwrap();
        let link = &bundle.links[0];
        let into_first: Vec<usize> = link.flows.iter().filter(|f| f.from_cluster == 0).map(|f| f.to_cluster).collect();
        assert_eq!(into_first.len(), 2);
        assert_eq!(link.matching.len(), 2);
    }

    #[test]
    fn uniform_marginals_are_insignificant() {
        let rows = vec![vec![0.5, 0.5]; 4];
        let layer = layer_from_marginals(2, &rows).unwrap();
        assert!(layer.significant.iter().all(|&s| !s));
        let rows = vec![vec![0.9, 0.1], vec![0.9000001, 0.0999999]];
        let layer = layer_from_marginals(2, &rows).unwrap();
        assert_eq!(layer.significant, vec![false, true]);
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = layer_from_marginals(2, &hard(&[1, 0, 1, 1], 2)).unwrap();
        let b = layer_from_marginals(3, &[vec![0.2, 0.3, 0.5], vec![1.0, 0.0, 0.0], vec![0.1, 0.8, 0.1], vec![0.3, 0.3, 0.4]]).unwrap();
        let bundle = AlluvialBundle::from_layers(vec![10, 11, 12, 20], vec![a, b]).unwrap();
        let files = export_alluvial(&bundle, dir.path()).unwrap();
        assert_eq!(files.len(), 3);
        assert_eq!(read_alluvial(dir.path()).unwrap(), bundle);
    }

    #[test]
    fn single_layer() {
        let dir = tempfile::tempdir().unwrap();
        let a = layer_from_marginals(2, &hard(&[0, 1], 2)).unwrap();
        let bundle = AlluvialBundle::from_layers(vec![0, 1], vec![a]).unwrap();
        assert!(bundle.links.is_empty());
        assert_eq!(export_alluvial(&bundle, dir.path()).unwrap().len(), 2);
        assert_eq!(read_alluvial(dir.path()).unwrap(), bundle);
    }
}
