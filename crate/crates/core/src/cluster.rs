//! Ward agglomerative clustering on `J − S` and dendrogram cutting.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

/// How input dissimilarities enter the Lance–Williams recurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WardConvention {
    /// Square the dissimilarities first; heights are on the squared scale.
    #[default]
    Squared,
    /// Feed the dissimilarities to the recurrence as they are.
    Unsquared,
}

impl FromStr for WardConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(Self::Squared),
            "unsquared" => Ok(Self::Unsquared),
            other => Err(Error::InvalidArgument(format!(
                "Ward convention must be `squared` or `unsquared`, got `{other}`"
            ))),
        }
    }
}

/// One agglomeration step. Leaves are nodes `0..N`; merge `k` creates node `N + k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub gene_ids: Vec<String>,
    pub convention: WardConvention,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn n_leaves(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn max_height(&self) -> f64 {
        self.merges.iter().map(|m| m.height).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let d: Self = serde_json::from_str(text)?;
        if d.merges.len() + 1 != d.gene_ids.len() {
            return Err(Error::InvalidArgument(format!(
                "dendrogram over {} leaves must have {} merges, found {}",
                d.gene_ids.len(),
                d.gene_ids.len().saturating_sub(1),
                d.merges.len()
            )));
        }
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Ward clustering of the distances `1 − S`.
pub fn ward_cluster(s: &SimilarityMatrix, convention: WardConvention) -> Result<Dendrogram> {
    ward_from_distances(s.gene_ids().to_vec(), &s.distances(), convention)
}

/// Ward clustering of a dense row-major dissimilarity matrix.
///
/// Each step merges the closest pair of active clusters, ties going to the
/// lexicographically smallest `(slot_i, slot_j)`; the merged cluster takes the
/// lower slot, so a slot is always identified by its smallest leaf.
pub fn ward_from_distances(gene_ids: Vec<String>, dist: &[f64], convention: WardConvention) -> Result<Dendrogram> {
    let n = gene_ids.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("clustering needs at least 2 items, got {n}")));
    }
    if dist.len() != n * n {
        return Err(Error::LengthMismatch {
            what: "dissimilarity matrix",
            expected: n * n,
            got: dist.len(),
        });
    }
    for i in 0..n {
        for j in 0..n {
            let v = dist[i * n + j];
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "dissimilarity ({i}, {j}) must be finite and non-negative, got {v}"
                )));
            }
            if v != dist[j * n + i] {
                return Err(Error::NotSymmetric { i, j });
            }
        }
    }

    let mut d: Vec<f64> = match convention {
        WardConvention::Squared => dist.iter().map(|v| v * v).collect(),
        WardConvention::Unsquared => dist.to_vec(),
    };
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut node: Vec<usize> = (0..n).collect();
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best = (usize::MAX, usize::MAX, f64::INFINITY);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && d[i * n + j] < best.2 {
                    best = (i, j, d[i * n + j]);
                }
            }
        }
        let (i, j, h) = best;
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let nk = size[k] as f64;
            let v = ((ni + nk) * d[i * n + k] + (nj + nk) * d[j * n + k] - nk * h) / (ni + nj + nk);
            d[i * n + k] = v;
            d[k * n + i] = v;
        }
        active[j] = false;
        size[i] += size[j];
        merges.push(Merge {
            left: node[i].min(node[j]),
            right: node[i].max(node[j]),
            height: h,
            size: size[i],
        });
        node[i] = n + step;
    }
    Ok(Dendrogram {
        gene_ids,
        convention,
        merges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutMode {
    /// Keep the merges strictly below this height (the leading run of them;
    /// Ward heights are non-decreasing).
    Height(f64),
    /// Stop once this many clusters remain.
    Clusters(usize),
}

/// Gene → 1-based cluster label, numbered by first appearance in gene order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterAssignment {
    gene_ids: Vec<String>,
    labels: Vec<usize>,
}

impl ClusterAssignment {
    /// Relabels arbitrary group keys into contiguous labels by first appearance.
    pub fn from_groups(gene_ids: Vec<String>, groups: &[usize]) -> Result<Self> {
        if gene_ids.len() != groups.len() {
            return Err(Error::LengthMismatch {
                what: "cluster labels",
                expected: gene_ids.len(),
                got: groups.len(),
            });
        }
        let mut seen = HashMap::new();
        let labels = groups
            .iter()
            .map(|g| {
                let next = seen.len() + 1;
                *seen.entry(*g).or_insert(next)
            })
            .collect();
        Ok(Self { gene_ids, labels })
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Gene ids per cluster, indexed by `label − 1`.
    pub fn clusters(&self) -> Vec<Vec<String>> {
        let mut out = vec![Vec::new(); self.n_clusters()];
        for (id, &l) in self.gene_ids.iter().zip(&self.labels) {
            out[l - 1].push(id.clone());
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["gene", "cluster"])?;
        for (id, l) in self.gene_ids.iter().zip(&self.labels) {
            w.write_record([id.as_str(), &l.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() != 2 || &header[0] != "gene" || &header[1] != "cluster" {
            return Err(Error::parse(origin, 1, "expected header `gene,cluster`"));
        }
        let (mut ids, mut groups) = (Vec::new(), Vec::new());
        for (k, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            if rec.len() != 2 {
                return Err(Error::parse(origin, line, format!("expected 2 fields, found {}", rec.len())));
            }
            let label: usize = rec[1]
                .trim()
                .parse()
                .map_err(|_| Error::parse(origin, line, format!("bad cluster label `{}`", &rec[1])))?;
            ids.push(rec[0].trim().to_string());
            groups.push(label);
        }
        Self::from_groups(ids, &groups)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, path)
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Flat clustering from a dendrogram.
pub fn cut(dend: &Dendrogram, mode: CutMode) -> Result<ClusterAssignment> {
    let n = dend.n_leaves();
    let keep: Vec<bool> = match mode {
        CutMode::Height(h) => {
            if !(h >= 0.0) {
                return Err(Error::InvalidArgument(format!("cut height must be non-negative, got {h}")));
            }
            let below = dend.merges.iter().take_while(|m| m.height < h).count();
            (0..dend.merges.len()).map(|s| s < below).collect()
        }
        CutMode::Clusters(k) => {
            if k < 1 || k > n {
                return Err(Error::InvalidArgument(format!("cluster count must be in 1..={n}, got {k}")));
            }
            (0..dend.merges.len()).map(|s| s < n - k).collect()
        }
    };
    // Union-find over nodes; a merge node's representative is its left child's.
    let mut parent: Vec<usize> = (0..n + dend.merges.len()).collect();
    for (s, m) in dend.merges.iter().enumerate() {
        let id = n + s;
        let a = find(&mut parent, m.left);
        parent[id] = a;
        if keep[s] {
            let b = find(&mut parent, m.right);
            parent[b] = a;
        }
    }
    let groups: Vec<usize> = (0..n).map(|leaf| find(&mut parent, leaf)).collect();
    ClusterAssignment::from_groups(dend.gene_ids.clone(), &groups)
}
