//! Expression matrices on a shared time grid, not-a-knot cubic splines with
//! closed-form cumulative integrals, the fold-change filter and the Pearson
//! baseline similarity.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

/// Strictly increasing sample times (hours), at least four of them.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub const MIN_POINTS: usize = 4;

    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} time points, got {}",
                Self::MIN_POINTS,
                times.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("time points must be finite".into()));
        }
        if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "time points must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.end() - self.start()
    }
}

/// N genes × n time points of log₂ fold-change values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    gene_ids: Vec<String>,
    values: Vec<f64>,
    grid: TimeGrid,
}

impl ExpressionMatrix {
    /// `values` is row-major, one row per gene.
    pub fn new(gene_ids: Vec<String>, values: Vec<f64>, grid: TimeGrid) -> Result<Self> {
        if gene_ids.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "an expression matrix needs at least 2 genes, got {}",
                gene_ids.len()
            )));
        }
        let n = grid.len();
        if values.len() != gene_ids.len() * n {
            return Err(Error::LengthMismatch {
                what: "expression values",
                expected: gene_ids.len() * n,
                got: values.len(),
            });
        }
        let mut seen = HashSet::with_capacity(gene_ids.len());
        for id in &gene_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate gene id `{id}`")));
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "expression of gene `{}` at t = {}",
                gene_ids[pos / n],
                grid.times()[pos % n]
            )));
        }
        Ok(Self {
            gene_ids,
            values,
            grid,
        })
    }

    pub fn from_rows(gene_ids: Vec<String>, rows: &[Vec<f64>], grid: TimeGrid) -> Result<Self> {
        let n = grid.len();
        let mut values = Vec::with_capacity(rows.len() * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::LengthMismatch {
                    what: "expression row",
                    expected: n,
                    got: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(gene_ids, values, grid)
    }

    pub fn n_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn n_times(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn gene_ids(&self) -> &[String] {
        &self.gene_ids
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_times();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.gene_ids.iter().position(|g| g == id)
    }

    pub fn index_map(&self) -> HashMap<&str, usize> {
        self.gene_ids
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i))
            .collect()
    }

    /// Rows whose values are all identical; downstream R² for them is 0.
    pub fn constant_rows(&self) -> Vec<bool> {
        (0..self.n_genes()).map(|i| is_constant(self.row(i))).collect()
    }

    /// Keeps the listed genes, in matrix order.
    pub fn subset(&self, keep: &HashSet<String>) -> Result<Self> {
        let mut ids = Vec::new();
        let mut values = Vec::new();
        for (i, id) in self.gene_ids.iter().enumerate() {
            if keep.contains(id) {
                ids.push(id.clone());
                values.extend_from_slice(self.row(i));
            }
        }
        Self::new(ids, values, self.grid.clone())
    }

    /// Reads the `gene,<t1>,<t2>,...` CSV layout. `NA` and other non-numeric
    /// cells are rejected.
    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let mut times = Vec::with_capacity(header.len().saturating_sub(1));
        for field in header.iter().skip(1) {
            times.push(
                field
                    .parse::<f64>()
                    .map_err(|_| Error::parse(origin, 1, format!("time header `{field}` is not a number")))?,
            );
        }
        let grid = TimeGrid::new(times).map_err(|e| Error::parse(origin, 1, e.to_string()))?;
        let n = grid.len();
        let mut ids = Vec::new();
        let mut values = Vec::new();
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
            ids.push(record[0].to_string());
            for field in record.iter().skip(1) {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::parse(origin, line, format!("value `{field}` is not a number")))?;
                if !v.is_finite() {
                    return Err(Error::parse(origin, line, format!("value `{field}` is not finite")));
                }
                values.push(v);
            }
        }
        Self::new(ids, values, grid).map_err(|e| match e {
            Error::Parse { .. } => e,
            other => Error::parse(origin, 0, other.to_string()),
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["gene".to_string()];
        header.extend(self.grid.times().iter().map(|t| t.to_string()));
        w.write_record(&header)?;
        for (i, id) in self.gene_ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.row(i).iter().map(|v| v.to_string()));
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

pub(crate) fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|v| *v == values[0])
}

/// Piecewise cubic `s(t) = y_i + d_i u + c2_i u² + c3_i u³` with `u = t - t_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineInterpolant {
    knots: Vec<f64>,
    /// `[y_i, d_i, c2_i, c3_i]` for each of the `n - 1` intervals.
    coeffs: Vec<[f64; 4]>,
}

impl SplineInterpolant {
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn coefficients(&self) -> &[[f64; 4]] {
        &self.coeffs
    }

    fn interval(&self, t: f64) -> usize {
        let last = self.coeffs.len() - 1;
        // partition_point gives the first knot > t; the piece starts one before.
        let idx = self.knots.partition_point(|&k| k <= t);
        idx.saturating_sub(1).min(last)
    }

    /// Evaluates the spline; outside the knot span the end pieces are extended.
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let [a, b, c, d] = self.coeffs[i];
        let u = t - self.knots[i];
        a + u * (b + u * (c + u * d))
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let [_, b, c, d] = self.coeffs[i];
        let u = t - self.knots[i];
        b + u * (2.0 * c + 3.0 * d * u)
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let [_, _, c, d] = self.coeffs[i];
        let u = t - self.knots[i];
        2.0 * c + 6.0 * d * u
    }

    /// Exact integral of piece `i` over its whole interval.
    fn piece_integral(&self, i: usize) -> f64 {
        let h = self.knots[i + 1] - self.knots[i];
        let [a, b, c, d] = self.coeffs[i];
        h * (a + h * (b / 2.0 + h * (c / 3.0 + h * d / 4.0)))
    }
}

/// Fits the not-a-knot cubic spline through `(grid[i], values[i])`.
pub fn fit_spline(values: &[f64], grid: &TimeGrid) -> Result<SplineInterpolant> {
    let x = grid.times();
    let n = x.len();
    if values.len() != n {
        return Err(Error::LengthMismatch {
            what: "spline values",
            expected: n,
            got: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("spline values".into()));
    }
    // TimeGrid already guarantees n >= 4.
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let slope: Vec<f64> = values
        .windows(2)
        .zip(&dx)
        .map(|(w, h)| (w[1] - w[0]) / h)
        .collect();

    // Tridiagonal system for the knot derivatives: sub[k] = A[k+1][k],
    // diag[k] = A[k][k], sup[k] = A[k][k+1].
    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];

    for i in 1..n - 1 {
        sub[i - 1] = dx[i];
        diag[i] = 2.0 * (dx[i - 1] + dx[i]);
        sup[i] = dx[i - 1];
        rhs[i] = 3.0 * (dx[i] * slope[i - 1] + dx[i - 1] * slope[i]);
    }

    // Not-a-knot: third derivative continuous at the second and penultimate knots.
    let d0 = x[2] - x[0];
    diag[0] = dx[1];
    sup[0] = d0;
    rhs[0] = ((dx[0] + 2.0 * d0) * dx[1] * slope[0] + dx[0] * dx[0] * slope[1]) / d0;

    let dn = x[n - 1] - x[n - 3];
    diag[n - 1] = dx[n - 3];
    sub[n - 2] = dn;
    rhs[n - 1] = (dx[n - 2] * dx[n - 2] * slope[n - 3] + (2.0 * dn + dx[n - 2]) * dx[n - 3] * slope[n - 2]) / dn;

    let deriv = solve_tridiagonal(sub, diag, sup, rhs)?;

    let coeffs = (0..n - 1)
        .map(|i| {
            let h = dx[i];
            let t = (deriv[i] + deriv[i + 1] - 2.0 * slope[i]) / h;
            [values[i], deriv[i], (slope[i] - deriv[i]) / h - t, t / h]
        })
        .collect();

    Ok(SplineInterpolant {
        knots: x.to_vec(),
        coeffs,
    })
}

/// Gaussian elimination with partial pivoting on a tridiagonal system
/// (row interchanges create one extra super-diagonal of fill).
fn solve_tridiagonal(sub: Vec<f64>, mut diag: Vec<f64>, mut sup: Vec<f64>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = diag.len();
    let mut fill = vec![0.0; n.saturating_sub(2)];
    let singular = || Error::Degenerate("singular spline system".into());

    for i in 0..n - 1 {
        if diag[i].abs() >= sub[i].abs() {
            if diag[i] == 0.0 {
                return Err(singular());
            }
            let f = sub[i] / diag[i];
            diag[i + 1] -= f * sup[i];
            b[i + 1] -= f * b[i];
        } else {
            let f = diag[i] / sub[i];
            diag[i] = sub[i];
            let tmp = diag[i + 1];
            diag[i + 1] = sup[i] - f * tmp;
            if i + 2 < n {
                fill[i] = sup[i + 1];
                sup[i + 1] = -f * fill[i];
            }
            sup[i] = tmp;
            let bi = b[i];
            b[i] = b[i + 1];
            b[i + 1] = bi - f * b[i + 1];
        }
    }
    if diag[n - 1] == 0.0 {
        return Err(singular());
    }
    b[n - 1] /= diag[n - 1];
    b[n - 2] = (b[n - 2] - sup[n - 2] * b[n - 1]) / diag[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - sup[i] * b[i + 1] - fill[i] * b[i + 2]) / diag[i];
    }
    Ok(b)
}

/// `v[i] = ∫ s(t) dt` from the first knot to knot `i`, piece by piece in
/// closed form. `v[0]` is always 0.
pub fn cumulative_integral(spline: &SplineInterpolant) -> Vec<f64> {
    let mut out = Vec::with_capacity(spline.knots.len());
    let mut acc = 0.0;
    out.push(acc);
    for i in 0..spline.coeffs.len() {
        acc += spline.piece_integral(i);
        out.push(acc);
    }
    out
}

/// Ids of genes whose largest absolute value reaches `threshold` (inclusive).
pub fn fold_change_filter(matrix: &ExpressionMatrix, threshold: f64) -> Result<Vec<String>> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "fold-change threshold must be positive, got {threshold}"
        )));
    }
    Ok(matrix
        .gene_ids()
        .iter()
        .enumerate()
        .filter(|(i, _)| matrix.row(*i).iter().any(|v| v.abs() >= threshold))
        .map(|(_, id)| id.clone())
        .collect())
}

/// Pearson correlation of two equal-length series; `None` when either is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if is_constant(x) || is_constant(y) || sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson similarity between every pair of rows.
///
/// Pairs involving a constant row get similarity 0; the returned flags mark
/// those rows.
pub fn pearson_similarity(matrix: &ExpressionMatrix) -> (SimilarityMatrix, Vec<bool>) {
    let flags = matrix.constant_rows();
    let s = SimilarityMatrix::from_upper(matrix.gene_ids().to_vec(), |i, j| {
        pearson(matrix.row(i), matrix.row(j)).unwrap_or(0.0)
    });
    (s, flags)
}
