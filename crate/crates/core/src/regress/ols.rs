use nalgebra::{DMatrix, DVector};

use super::{DesignPair, R2};
use crate::timeseries::is_constant;

/// Least-squares fit of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta: DVector<f64>,
    pub fitted: DVector<f64>,
    /// Residual sum of squares `‖Y − Ŷ‖²`.
    pub rss: f64,
    /// `rss / (n − p)` with `p` the design's column count.
    pub sigma2_hat: f64,
    pub rank: usize,
    /// Moore–Penrose inverse of `XᵀX`; the plain inverse at full rank.
    pub xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.beta.len()
    }
}

/// Least squares through the SVD of the column-equilibrated design, so
/// columns on very different scales (the intercept next to tiny expression
/// values) do not cost accuracy. Scaled singular values below
/// `max(n, p) · ε · s_max` are treated as zero; a rank-deficient design still
/// yields the minimum-norm solution in scaled coordinates, flagged through
/// [`OlsFit::rank`].
pub fn ols_fit(d: &DesignPair) -> OlsFit {
    let x = d.x();
    let y = d.y();
    let (n, p) = x.shape();
    let scale: Vec<f64> = (0..p)
        .map(|c| {
            let norm = x.column(c).norm();
            if norm > 0.0 && norm.is_finite() {
                norm
            } else {
                1.0
            }
        })
        .collect();
    let mut xs = x.clone();
    for (c, &sc) in scale.iter().enumerate() {
        xs.column_mut(c).unscale_mut(sc);
    }
    let (u, sv, v) = jacobi_svd(xs);

    let s_max = sv.iter().cloned().fold(0.0, f64::max);
    let tol = n.max(p) as f64 * f64::EPSILON * s_max;

    let mut beta = DVector::zeros(p);
    let mut xtx_inv = DMatrix::zeros(p, p);
    let mut rank = 0;
    for (k, &s) in sv.iter().enumerate() {
        if s <= tol || s == 0.0 {
            continue;
        }
        rank += 1;
        let vk = v.column(k);
        let coef = u.column(k).dot(y) / s;
        beta.axpy(coef, &vk, 1.0);
        xtx_inv.ger(1.0 / (s * s), &vk, &vk, 1.0);
    }
    for c in 0..p {
        beta[c] /= scale[c];
        for r in 0..p {
            xtx_inv[(r, c)] /= scale[r] * scale[c];
        }
    }

    let fitted = x * &beta;
    let rss = (y - &fitted).norm_squared();
    OlsFit {
        sigma2_hat: rss / (n - p) as f64,
        beta,
        fitted,
        rss,
        rank,
        xtx_inv,
    }
}

/// One-sided (Hestenes) Jacobi SVD of a tall matrix: rotates column pairs
/// until they are mutually orthogonal. Returns `U` (n×p, zero columns for zero
/// singular values), the singular values and `V` (p×p), unsorted. Used instead
/// of the bidiagonal SVD, which can stall short of convergence when two
/// singular values nearly coincide.
fn jacobi_svd(mut a: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let p = a.ncols();
    let mut v = DMatrix::identity(p, p);
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..p {
            for j in (i + 1)..p {
                let alpha = a.column(i).norm_squared();
                let beta = a.column(j).norm_squared();
                let gamma = a.column(i).dot(&a.column(j));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut a, &mut v] {
                    for r in 0..m.nrows() {
                        let (x, y) = (m[(r, i)], m[(r, j)]);
                        m[(r, i)] = c * x - s * y;
                        m[(r, j)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sv: Vec<f64> = (0..p).map(|k| a.column(k).norm()).collect();
    for (k, &s) in sv.iter().enumerate() {
        if s > 0.0 {
            a.column_mut(k).unscale_mut(s);
        }
    }
    (a, sv, v)
}

/// Classical `R² = ‖Ŷ − Ȳ1‖² / ‖Y − Ȳ1‖²`, clamped to `[0, 1]`.
/// A constant response gives 0 with the degenerate flag.
pub fn classic_r2(d: &DesignPair, fitted: &DVector<f64>) -> R2 {
    let y = d.y();
    if is_constant(y.as_slice()) {
        return R2::DEGENERATE;
    }
    let mean = y.mean();
    let ss_fit: f64 = fitted.iter().map(|f| (f - mean).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return R2::DEGENERATE;
    }
    R2::ok((ss_fit / ss_tot).clamp(0.0, 1.0))
}
