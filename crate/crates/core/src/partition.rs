use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cluster assignment with `q` label slots, some possibly empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    q: usize,
}

impl Partition {
    pub fn new(labels: Vec<usize>, q: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= q) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} is not below q = {q}"
            )));
        }
        Ok(Partition { labels, q })
    }

    /// Uses `max label + 1` slots.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let q = labels.iter().max().map_or(1, |m| m + 1);
        Partition { labels, q }
    }

    pub fn singletons(n: usize) -> Self {
        Partition {
            labels: (0..n).collect(),
            q: n.max(1),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.q];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Number of non-empty clusters.
    pub fn effective_q(&self) -> usize {
        self.sizes().iter().filter(|&&s| s > 0).count()
    }

    /// Relabels non-empty clusters to `0..k` in order of first appearance.
    pub fn compacted(&self) -> Partition {
        let mut map = vec![usize::MAX; self.q];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        Partition {
            labels,
            q: next.max(1),
        }
    }

    /// Fraction of vertices on which two partitions agree, maximized over
    /// label permutations (exhaustive for up to 8 slots, greedy beyond).
    pub fn overlap(&self, other: &Partition) -> f64 {
        assert_eq!(self.len(), other.len(), "partitions cover different vertex sets");
        if self.is_empty() {
            return 1.0;
        }
        let (qa, qb) = (self.q, other.q);
        let mut table = vec![vec![0usize; qb]; qa];
        for (&a, &b) in self.labels.iter().zip(&other.labels) {
            table[a][b] += 1;
        }
        let best = if qa.max(qb) <= 8 {
            best_matching_exhaustive(&table, qb)
        } else {
            best_matching_greedy(&table, qa, qb)
        };
        best as f64 / self.len() as f64
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for l in &self.labels {
            writeln!(out, "{l}")?;
        }
        Ok(())
    }

    /// Reads one label per line; blank lines and `#` comments are skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Partition> {
        let mut labels = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::Parse {
                line: k + 1,
                message: e.to_string(),
            })?;
            let s = line.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            labels.push(s.parse::<usize>().map_err(|_| Error::Parse {
                line: k + 1,
                message: format!("`{s}` is not a cluster label"),
            })?);
        }
        Ok(Partition::from_labels(labels))
    }
}

fn best_matching_exhaustive(table: &[Vec<usize>], qb: usize) -> usize {
    // Assign each row to a distinct column (or none), maximizing the total.
    fn go(row: usize, used: u32, table: &[Vec<usize>], qb: usize) -> usize {
        if row == table.len() {
            return 0;
        }
        let mut best = go(row + 1, used, table, qb);
        for c in 0..qb {
            if used & (1 << c) == 0 {
                best = best.max(table[row][c] + go(row + 1, used | (1 << c), table, qb));
            }
        }
        best
    }
    go(0, 0, table, qb)
}

fn best_matching_greedy(table: &[Vec<usize>], qa: usize, qb: usize) -> usize {
    let mut cells: Vec<(usize, usize, usize)> = Vec::new();
    for (a, row) in table.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            if c > 0 {
                cells.push((c, a, b));
            }
        }
    }
    cells.sort_unstable_by(|x, y| y.cmp(x));
    let (mut ra, mut rb) = (vec![false; qa], vec![false; qb]);
    let mut total = 0;
    for (c, a, b) in cells {
        if !ra[a] && !rb[b] {
            ra[a] = true;
            rb[b] = true;
            total += c;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_labels() {
        assert!(Partition::new(vec![0, 2], 2).is_err());
        let p = Partition::new(vec![0, 0, 2], 4).unwrap();
        assert_eq!(p.effective_q(), 2);
        assert_eq!(p.sizes(), vec![2, 0, 1, 0]);
    }

    #[test]
    fn overlap_is_permutation_invariant() {
        let a = Partition::from_labels(vec![0, 0, 1, 1, 2]);
        let b = Partition::from_labels(vec![2, 2, 0, 0, 1]);
        assert_eq!(a.overlap(&b), 1.0);
        let c = Partition::from_labels(vec![1, 0, 0, 0, 0]);
        assert!((a.overlap(&c) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn compacted_relabels_in_first_seen_order() {
        let p = Partition::new(vec![3, 1, 3, 0], 5).unwrap();
        assert_eq!(p.compacted().labels(), &[0, 1, 0, 2]);
        assert_eq!(p.compacted().q(), 3);
    }
}
