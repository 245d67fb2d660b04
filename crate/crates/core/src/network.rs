//! Thresholded association networks over the similarity matrix.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::prior::{Association, PriorAdjacency};
use crate::similarity::SimilarityMatrix;

/// Edge status against the prior adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    /// Prior says associated.
    Known,
    /// No prior evidence.
    Novel,
    /// Prior says unlikely.
    Unlikely,
}

impl EdgeClass {
    pub fn from_association(w: Association) -> Self {
        match w {
            Association::Associated => Self::Known,
            Association::Unknown => Self::Novel,
            Association::Unlikely => Self::Unlikely,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Known => "known",
            Self::Novel => "novel",
            Self::Unlikely => "unlikely",
        }
    }
}

impl fmt::Display for EdgeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
    pub class: EdgeClass,
}

/// Undirected network; edges are kept in `(a, b)` lexicographic order with `a < b`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneNetwork {
    nodes: Vec<String>,
    edges: Vec<Edge>,
}

impl GeneNetwork {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn count(&self, class: EdgeClass) -> usize {
        self.edges.iter().filter(|e| e.class == class).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    /// `gene_a gene_b weight class`, tab-separated with a header.
    pub fn write_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "gene_a\tgene_b\tweight\tclass")?;
        for e in &self.edges {
            writeln!(
                writer,
                "{}\t{}\t{}\t{}",
                self.nodes[e.a], self.nodes[e.b], e.weight, e.class
            )?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Graphviz rendering; known edges red, novel blue, unlikely grey.
    pub fn write_dot<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "graph genes {{")?;
        for id in &self.nodes {
            writeln!(writer, "  \"{}\";", escape(id))?;
        }
        for e in &self.edges {
            let color = match e.class {
                EdgeClass::Known => "red",
                EdgeClass::Novel => "blue",
                EdgeClass::Unlikely => "gray",
            };
            writeln!(
                writer,
                "  \"{}\" -- \"{}\" [weight={}, color={color}];",
                escape(&self.nodes[e.a]),
                escape(&self.nodes[e.b]),
                e.weight
            )?;
        }
        writeln!(writer, "}}")?;
        writer.flush()?;
        Ok(())
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Edges wherever `S_ij > threshold`, classified by `W_ij`.
pub fn build_network(s: &SimilarityMatrix, w: &PriorAdjacency, threshold: f64) -> Result<GeneNetwork> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "network threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let w = w.aligned_to(s.gene_ids())?;
    let n = s.len();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let weight = s.get(a, b);
            if weight > threshold {
                edges.push(Edge {
                    a,
                    b,
                    weight,
                    class: EdgeClass::from_association(w.get(a, b)),
                });
            }
        }
    }
    Ok(GeneNetwork {
        nodes: s.gene_ids().to_vec(),
        edges,
    })
}

/// Subnetwork induced by the seeds and their direct neighbours.
pub fn neighborhood(net: &GeneNetwork, seeds: &[String]) -> Result<GeneNetwork> {
    let index: HashMap<&str, usize> = net.nodes.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
    let mut keep = BTreeSet::new();
    for s in seeds {
        let k = *index.get(s.as_str()).ok_or_else(|| Error::UnknownGene(s.clone()))?;
        keep.insert(k);
    }
    let seed_set = keep.clone();
    for e in &net.edges {
        if seed_set.contains(&e.a) {
            keep.insert(e.b);
        }
        if seed_set.contains(&e.b) {
            keep.insert(e.a);
        }
    }
    let remap: HashMap<usize, usize> = keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let edges = net
        .edges
        .iter()
        .filter_map(|e| {
            Some(Edge {
                a: *remap.get(&e.a)?,
                b: *remap.get(&e.b)?,
                ..*e
            })
        })
        .collect();
    Ok(GeneNetwork {
        nodes: keep.iter().map(|&k| net.nodes[k].clone()).collect(),
        edges,
    })
}

/// `(gene, degree)` sorted by degree descending, then gene order.
pub fn degree_report(net: &GeneNetwork) -> Vec<(String, usize)> {
    let deg = net.degrees();
    let mut order: Vec<usize> = (0..net.nodes.len()).collect();
    order.sort_by(|&x, &y| deg[y].cmp(&deg[x]).then(x.cmp(&y)));
    order.into_iter().map(|k| (net.nodes[k].clone(), deg[k])).collect()
}

pub fn write_degree_tsv<W: Write>(mut writer: W, report: &[(String, usize)]) -> Result<()> {
    writeln!(writer, "gene\tdegree")?;
    for (g, d) in report {
        writeln!(writer, "{g}\t{d}")?;
    }
    writer.flush()?;
    Ok(())
}
