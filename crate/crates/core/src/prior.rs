//! The ternary prior adjacency `W`: which gene pairs external evidence calls
//! associated, unlikely, or leaves unknown.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::read_square_csv;

/// One cell of the prior adjacency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Association {
    /// `1`: prior evidence says the genes are associated.
    Associated,
    /// `0`: the genes are unlikely to be associated.
    Unlikely,
    /// `NA`: nothing is known.
    Unknown,
}

impl Association {
    pub fn as_str(self) -> &'static str {
        match self {
            Association::Associated => "1",
            Association::Unlikely => "0",
            Association::Unknown => "NA",
        }
    }
}

impl fmt::Display for Association {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Association {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "1" => Ok(Association::Associated),
            "0" => Ok(Association::Unlikely),
            "NA" | "na" | "" => Ok(Association::Unknown),
            other => Err(format!("prior cell must be 1, 0 or NA, got `{other}`")),
        }
    }
}

/// Symmetric N×N prior adjacency aligned with an expression matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorAdjacency {
    gene_ids: Vec<String>,
    entries: Vec<Association>,
}

impl PriorAdjacency {
    /// Every off-diagonal pair unknown.
    pub fn unknown(gene_ids: Vec<String>) -> Self {
        Self::filled(gene_ids, Association::Unknown)
    }

    pub fn filled(gene_ids: Vec<String>, value: Association) -> Self {
        let n = gene_ids.len();
        let mut entries = vec![value; n * n];
        for i in 0..n {
            entries[i * n + i] = Association::Associated;
        }
        Self { gene_ids, entries }
    }

    /// Builds from row-major cells. The diagonal is overwritten with
    /// `Associated`; off-diagonal cells must be symmetric.
    pub fn from_dense(gene_ids: Vec<String>, mut entries: Vec<Association>) -> Result<Self> {
        let n = gene_ids.len();
        if entries.len() != n * n {
            return Err(Error::LengthMismatch {
                what: "prior cells",
                expected: n * n,
                got: entries.len(),
            });
        }
        for i in 0..n {
            entries[i * n + i] = Association::Associated;
            for j in (i + 1)..n {
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::NotSymmetric { i, j });
                }
            }
        }
        Ok(Self { gene_ids, entries })
    }

    pub fn len(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gene_ids.is_empty()
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    /// Symmetric lookup; the diagonal is always `Associated`.
    pub fn lookup(&self, i: usize, j: usize) -> Result<Association> {
        let n = self.len();
        for index in [i, j] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, len: n });
            }
        }
        Ok(self.entries[i * n + j])
    }

    /// Unchecked lookup for hot loops with indices already validated.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Association {
        self.entries[i * self.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: Association) {
        if i == j {
            return;
        }
        let n = self.len();
        self.entries[i * n + j] = value;
        self.entries[j * n + i] = value;
    }

    /// Reorders to `gene_ids`. Every requested gene must be present; genes
    /// only present in the prior are dropped.
    pub fn aligned_to(&self, gene_ids: &[String]) -> Result<Self> {
        if gene_ids == self.gene_ids.as_slice() {
            return Ok(self.clone());
        }
        let index: HashMap<&str, usize> = self
            .gene_ids
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect();
        let mut positions = Vec::with_capacity(gene_ids.len());
        let mut missing = Vec::new();
        for g in gene_ids {
            match index.get(g.as_str()) {
                Some(&p) => positions.push(p),
                None => missing.push(g.as_str()),
            }
        }
        if !missing.is_empty() {
            let shown: Vec<_> = missing.iter().take(5).collect();
            return Err(Error::GeneMismatch(format!(
                "{} expression gene(s) absent from the prior, e.g. {:?}",
                missing.len(),
                shown
            )));
        }
        let n = gene_ids.len();
        let mut entries = Vec::with_capacity(n * n);
        for &pi in &positions {
            for &pj in &positions {
                entries.push(self.get(pi, pj));
            }
        }
        Ok(Self {
            gene_ids: gene_ids.to_vec(),
            entries,
        })
    }

    pub fn count(&self, value: Association) -> usize {
        let n = self.len();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j) == value)
            .count()
    }

    /// Dense CSV: header row and first column of gene ids, cells `1`, `0` or `NA`.
    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let (ids, cells) = read_square_csv(reader, origin, |c| c.parse::<Association>())?;
        Self::from_dense(ids, cells)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["gene".to_string()];
        header.extend(self.gene_ids.iter().cloned());
        w.write_record(&header)?;
        let n = self.len();
        for (i, id) in self.gene_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend((0..n).map(|j| self.get(i, j).as_str().to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, path)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Pairwise association scores in `[0, 1]` (or unknown) plus the set of genes
/// the source database covers.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    scores: HashMap<(String, String), Option<f64>>,
    database: HashSet<String>,
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl ScoreTable {
    /// Builds a table from `(gene_a, gene_b, score)` rows. Without an explicit
    /// database list, every gene named in a row counts as covered.
    pub fn new<I>(rows: I, database: Option<HashSet<String>>) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String, Option<f64>)>,
    {
        let mut scores: HashMap<(String, String), Option<f64>> = HashMap::new();
        let mut named = HashSet::new();
        for (a, b, score) in rows {
            if let Some(s) = score {
                if !(0.0..=1.0).contains(&s) {
                    return Err(Error::InvalidArgument(format!(
                        "score for ({a}, {b}) must lie in [0, 1], got {s}"
                    )));
                }
            }
            named.insert(a.clone());
            named.insert(b.clone());
            if a == b {
                continue;
            }
            let key = pair_key(&a, &b);
            if let Some(prev) = scores.get(&key) {
                if *prev != score {
                    return Err(Error::Conflict {
                        a,
                        b,
                        detail: format!("{} vs {}", fmt_score(*prev), fmt_score(score)),
                    });
                }
            }
            scores.insert(key, score);
        }
        Ok(Self {
            scores,
            database: database.unwrap_or(named),
        })
    }

    pub fn score(&self, a: &str, b: &str) -> Option<Option<f64>> {
        self.scores.get(&pair_key(a, b)).copied()
    }

    pub fn in_database(&self, gene: &str) -> bool {
        self.database.contains(gene)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Score CSV `gene_a,gene_b,score`, with `NA` allowed for the score.
    pub fn read_scores<R: Read>(reader: R, origin: &Path, database: Option<HashSet<String>>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        for (k, record) in rdr.records().enumerate() {
            let line = k + 2;
            let record = record?;
            if record.len() != 3 {
                return Err(Error::parse(origin, line, format!("expected 3 fields, found {}", record.len())));
            }
            let score = match &record[2] {
                "NA" | "na" | "" => None,
                s => Some(
                    s.parse::<f64>()
                        .map_err(|_| Error::parse(origin, line, format!("score `{s}` is not a number")))?,
                ),
            };
            rows.push((record[0].to_string(), record[1].to_string(), score));
        }
        Self::new(rows, database)
    }

    /// One gene id per line; blank lines and `#` comments are skipped.
    pub fn read_database<R: Read>(reader: R) -> Result<HashSet<String>> {
        let mut out = HashSet::new();
        for line in std::io::BufReader::new(reader).lines() {
            let line = line?;
            let id = line.trim();
            if !id.is_empty() && !id.starts_with('#') {
                out.insert(id.to_string());
            }
        }
        Ok(out)
    }
}

fn fmt_score(s: Option<f64>) -> String {
    s.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Thresholds for turning scores into prior cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorThresholds {
    pub score: f64,
    pub replicate_corr: f64,
}

impl Default for PriorThresholds {
    fn default() -> Self {
        Self {
            score: 0.5,
            replicate_corr: 0.8,
        }
    }
}

/// Encodes a score table into `W` for `gene_ids`.
///
/// - score present and above `score` → `Associated`, otherwise `Unlikely`;
/// - both genes covered by the database but no score → `Associated` when the
///   replicate correlation exceeds `replicate_corr`, else `Unknown`;
/// - either gene outside the database → `Unknown`.
///
/// `replicate_corr` is a row-major N×N matrix aligned with `gene_ids`.
pub fn build_prior(
    scores: &ScoreTable,
    gene_ids: &[String],
    replicate_corr: Option<&[f64]>,
    thresholds: PriorThresholds,
) -> Result<PriorAdjacency> {
    for (name, t) in [("score", thresholds.score), ("replicate correlation", thresholds.replicate_corr)] {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} threshold must lie in (0, 1), got {t}")));
        }
    }
    let n = gene_ids.len();
    if let Some(c) = replicate_corr {
        if c.len() != n * n {
            return Err(Error::LengthMismatch {
                what: "replicate correlation matrix",
                expected: n * n,
                got: c.len(),
            });
        }
    }
    let mut prior = PriorAdjacency::unknown(gene_ids.to_vec());
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (&gene_ids[i], &gene_ids[j]);
            if !scores.in_database(a) || !scores.in_database(b) {
                continue;
            }
            let cell = match scores.score(a, b).flatten() {
                Some(s) if s > thresholds.score => Association::Associated,
                Some(_) => Association::Unlikely,
                None => match replicate_corr {
                    Some(c) if c[i * n + j] > thresholds.replicate_corr => Association::Associated,
                    _ => Association::Unknown,
                },
            };
            prior.set(i, j, cell);
        }
    }
    Ok(prior)
}

/// Reads a dense replicate-correlation CSV (gene header row and column) and
/// aligns it to `gene_ids`.
pub fn read_replicate_corr<R: Read>(reader: R, origin: &Path, gene_ids: &[String]) -> Result<Vec<f64>> {
    let (ids, values) = read_square_csv(reader, origin, |c| {
        c.parse::<f64>().map_err(|_| format!("not a number: `{c}`"))
    })?;
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, g)| (g.as_str(), i)).collect();
    let m = ids.len();
    let pos: Vec<usize> = gene_ids
        .iter()
        .map(|g| {
            index
                .get(g.as_str())
                .copied()
                .ok_or_else(|| Error::GeneMismatch(format!("gene `{g}` missing from {}", origin.display())))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(gene_ids.len() * gene_ids.len());
    for &pi in &pos {
        for &pj in &pos {
            out.push(values[pi * m + pj]);
        }
    }
    Ok(out)
}
