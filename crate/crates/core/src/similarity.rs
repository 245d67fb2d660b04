//! Dense, symmetric gene-by-gene similarity matrices and their CSV form.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Symmetric N×N similarity matrix labelled by gene id.
///
/// Used both for the symmetrized lead-lag R² (entries in `[0, 1]`) and for
/// the Pearson baseline (entries in `[-1, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    gene_ids: Vec<String>,
    values: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from row-major values, checking shape and exact symmetry.
    pub fn new(gene_ids: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = gene_ids.len();
        if values.len() != n * n {
            return Err(Error::LengthMismatch {
                what: "similarity values",
                expected: n * n,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "similarity entry ({}, {})",
                pos / n,
                pos % n
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if values[i * n + j] != values[j * n + i] {
                    return Err(Error::NotSymmetric { i, j });
                }
            }
        }
        Ok(Self { gene_ids, values })
    }

    /// Identity-diagonal matrix filled from a closure on the upper triangle.
    pub(crate) fn from_upper(gene_ids: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = gene_ids.len();
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
            for j in (i + 1)..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self { gene_ids, values }
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

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The dissimilarity `J - S` fed to clustering.
    pub fn distances(&self) -> Vec<f64> {
        self.values.iter().map(|s| 1.0 - s).collect()
    }

    /// Off-diagonal upper-triangle entries, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.len();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            out.extend_from_slice(&self.values[i * n + i + 1..(i + 1) * n]);
        }
        out
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = Vec::with_capacity(self.len() + 1);
        header.push("gene".to_string());
        header.extend(self.gene_ids.iter().cloned());
        w.write_record(&header)?;
        for (i, id) in self.gene_ids.iter().enumerate() {
            let mut rec = Vec::with_capacity(self.len() + 1);
            rec.push(id.clone());
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let (ids, values) = read_square_csv(reader, origin, |cell| {
            cell.parse::<f64>().map_err(|_| format!("not a number: `{cell}`"))
        })?;
        Self::new(ids, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, path)
    }
}

/// Reads a square CSV with a gene-id header row and a gene-id first column.
/// Column and row ids must list the same genes in the same order.
pub(crate) fn read_square_csv<R: Read, T>(
    reader: R,
    origin: &Path,
    mut cell: impl FnMut(&str) -> std::result::Result<T, String>,
) -> Result<(Vec<String>, Vec<T>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::parse(origin, 1, "header needs a gene column and at least one gene"));
    }
    let ids: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = ids.len();
    let mut values = Vec::with_capacity(n * n);
    let mut rows = 0;
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record?;
        if record.len() != n + 1 {
            return Err(Error::parse(
                origin,
                line,
                format!("expected {} fields, found {}", n + 1, record.len()),
            ));
        }
        if rows >= n {
            return Err(Error::parse(origin, line, "more rows than header columns"));
        }
        if record[0] != ids[rows] {
            return Err(Error::parse(
                origin,
                line,
                format!("row id `{}` does not match column id `{}`", &record[0], ids[rows]),
            ));
        }
        for field in record.iter().skip(1) {
            values.push(cell(field).map_err(|m| Error::parse(origin, line, m))?);
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::parse(origin, rows + 1, format!("expected {n} rows, found {rows}")));
    }
    Ok((ids, values))
}
