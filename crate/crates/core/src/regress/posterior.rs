use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ols_fit, DesignPair, OlsFit, R2};
use crate::error::{Error, Result};
use crate::timeseries::is_constant;

/// Inverse-gamma hyperparameters `(a, b)` on σ². They only move `a*`, `b*`
/// and posterior draws, never `β*` or the R².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperpriors {
    pub a: f64,
    pub b: f64,
}

impl Default for Hyperpriors {
    fn default() -> Self {
        Self { a: 0.001, b: 0.001 }
    }
}

/// Normal-inverse-gamma posterior under Zellner's g-prior
/// `β | σ² ~ N(β₀, g σ² (XᵀX)⁻¹)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorFit {
    pub beta0: DVector<f64>,
    pub beta_ols: DVector<f64>,
    /// `(β₀ + g β̂_OLS) / (1 + g)`
    pub beta_star: DVector<f64>,
    /// `g / (1 + g) · (XᵀX)⁻¹`
    pub v_star: DMatrix<f64>,
    pub a_star: f64,
    pub b_star: f64,
    pub g: f64,
    pub sigma2_hat: f64,
    /// `X β*`
    pub fitted: DVector<f64>,
    /// `X β₀`
    pub y0: DVector<f64>,
    pub rank_deficient: bool,
}

/// Posterior for a design, fitting least squares first.
pub fn posterior(d: &DesignPair, beta0: &DVector<f64>, g: f64, hyper: Hyperpriors) -> Result<PosteriorFit> {
    posterior_with_ols(d, &ols_fit(d), beta0, g, hyper)
}

/// Posterior reusing an existing least-squares fit of the same design.
pub fn posterior_with_ols(
    d: &DesignPair,
    ols: &OlsFit,
    beta0: &DVector<f64>,
    g: f64,
    hyper: Hyperpriors,
) -> Result<PosteriorFit> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::InvalidArgument(format!("g must be positive and finite, got {g}")));
    }
    if !(hyper.a > 0.0 && hyper.b > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hyperpriors must be positive, got a = {}, b = {}",
            hyper.a, hyper.b
        )));
    }
    if beta0.len() != d.p() {
        return Err(Error::LengthMismatch {
            what: "prior mean",
            expected: d.p(),
            got: beta0.len(),
        });
    }
    let shrink = g / (1.0 + g);
    let beta_star = beta0 * (1.0 / (1.0 + g)) + &ols.beta * shrink;
    let fitted = d.x() * &beta_star;
    let y0 = d.x() * beta0;
    // b* = b + ½(β₀ᵀV₀⁻¹β₀ + YᵀY − β*ᵀV*⁻¹β*) with V₀ = g(XᵀX)⁻¹ reduces to
    // b + ½(RSS + ‖Ŷ_OLS − Y₀‖² / (1 + g)); this form cannot cancel below b.
    let b_star = hyper.b + 0.5 * (ols.rss + (&ols.fitted - &y0).norm_squared() / (1.0 + g));
    Ok(PosteriorFit {
        beta0: beta0.clone(),
        beta_ols: ols.beta.clone(),
        beta_star,
        v_star: &ols.xtx_inv * shrink,
        a_star: hyper.a + d.n() as f64 / 2.0,
        b_star,
        g,
        sigma2_hat: ols.sigma2_hat,
        fitted,
        y0,
        rank_deficient: ols.rank_deficient(),
    })
}

fn sample_variance(v: impl Iterator<Item = f64> + Clone) -> f64 {
    let (count, sum) = v.clone().fold((0usize, 0.0), |(c, s), x| (c + 1, s + x));
    let mean = sum / count as f64;
    v.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count as f64 - 1.0)
}

/// `var(fit) / (var(fit) + var(y − fit))` with `(n − 1)`-denominator sample
/// variances. A constant response, or zero total, gives 0 flagged degenerate.
pub fn variance_ratio_r2(fitted: &[f64], y: &[f64]) -> R2 {
    if is_constant(y) {
        return R2::DEGENERATE;
    }
    let vf = sample_variance(fitted.iter().copied());
    let vr = sample_variance(y.iter().zip(fitted).map(|(a, f)| a - f));
    let total = vf + vr;
    if total == 0.0 || !total.is_finite() {
        return R2::DEGENERATE;
    }
    R2::ok((vf / total).clamp(0.0, 1.0))
}

/// Bayesian lead-lag R² of a posterior-mean fit.
pub fn bayesian_r2(fit: &PosteriorFit, y: &DVector<f64>) -> R2 {
    variance_ratio_r2(fit.fitted.as_slice(), y.as_slice())
}
