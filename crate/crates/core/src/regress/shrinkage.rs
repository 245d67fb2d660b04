//! SURE for the g-prior posterior mean and its closed-form minimizers.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{DesignPair, ModelVariant, OlsFit};
use crate::error::{Error, Result};
use crate::prior::Association;

/// Clamp applied to the closed-form `g*`, which can be ≤ 0 or unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GBounds {
    pub floor: f64,
    pub cap: f64,
}

impl Default for GBounds {
    fn default() -> Self {
        Self {
            floor: 1e-6,
            cap: 1e12,
        }
    }
}

impl GBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0 && self.cap > self.floor && self.cap.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "g bounds need 0 < floor < cap < ∞, got [{}, {}]",
                self.floor, self.cap
            )));
        }
        Ok(())
    }

    pub fn clamp(&self, g: f64) -> f64 {
        if g.is_nan() {
            self.floor
        } else {
            g.clamp(self.floor, self.cap)
        }
    }
}

/// A SURE-optimal `g` after clamping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GStar {
    pub g: f64,
    /// The closed-form value before clamping (`+∞` for a perfect fit).
    pub unclamped: f64,
    /// `σ̂² = 0`: the data are fit exactly and `g` sits at the cap.
    pub perfect_fit: bool,
}

impl GStar {
    pub fn clamped(&self) -> bool {
        self.g != self.unclamped
    }

    fn from_raw(raw: f64, bounds: &GBounds) -> Self {
        Self {
            g: bounds.clamp(raw),
            unclamped: raw,
            perfect_fit: false,
        }
    }

    fn perfect(bounds: &GBounds) -> Self {
        Self {
            g: bounds.cap,
            unclamped: f64::INFINITY,
            perfect_fit: true,
        }
    }
}

/// Stein's unbiased risk estimate of `‖Xβ*(g) − Xβ‖²`:
///
/// `‖Y − Xβ*(g)‖² + (2gp/(1+g) − n) σ̂²`
pub fn sure(g: f64, d: &DesignPair, beta0: &DVector<f64>, ols: &OlsFit) -> f64 {
    let n = d.n() as f64;
    let p = d.p() as f64;
    let w = g / (1.0 + g);
    let beta_star = beta0 * (1.0 - w) + &ols.beta * w;
    let resid = (d.y() - d.x() * beta_star).norm_squared();
    resid + (2.0 * w * p - n) * ols.sigma2_hat
}

/// Closed-form SURE minimizer `g* = ‖Ŷ_OLS − Y₀‖² / (p σ̂²) − 1`, clamped.
pub fn optimal_g(d: &DesignPair, beta0: &DVector<f64>, ols: &OlsFit, bounds: &GBounds) -> GStar {
    if ols.sigma2_hat == 0.0 {
        return GStar::perfect(bounds);
    }
    let y0 = d.x() * beta0;
    let dist = (&ols.fitted - y0).norm_squared();
    GStar::from_raw(dist / (d.p() as f64 * ols.sigma2_hat) - 1.0, bounds)
}

/// Joint SURE minimizer over `g` and the prior mean `(ξ, ξ, 0, …)`.
///
/// With `X₁₂` the sum of the first two design columns,
/// `ξ* = YᵀX₁₂ / ‖X₁₂‖²` and
/// `g* = (‖Ŷ‖²‖X₁₂‖² − (YᵀX₁₂)²) / (‖X₁₂‖² p σ̂²) − 1`.
pub fn optimal_g_xi(d: &DesignPair, ols: &OlsFit, bounds: &GBounds) -> Result<(f64, GStar)> {
    if d.variant() == ModelVariant::Own {
        return Err(Error::InvalidArgument(
            "the adaptive prior mean needs partner columns (Full or Other model)".into(),
        ));
    }
    let x12 = d.x().column(0) + d.x().column(1);
    let norm2 = x12.norm_squared();
    if norm2 == 0.0 {
        return Err(Error::Degenerate(
            "partner series and its integral are identically zero".into(),
        ));
    }
    let yx = d.y().dot(&x12);
    let xi = yx / norm2;
    if ols.sigma2_hat == 0.0 {
        return Ok((xi, GStar::perfect(bounds)));
    }
    let num = ols.fitted.norm_squared() * norm2 - yx * yx;
    let raw = num / (norm2 * d.p() as f64 * ols.sigma2_hat) - 1.0;
    Ok((xi, GStar::from_raw(raw, bounds)))
}

/// `g` conditional on the prior cell: unlikely pairs use `g = 1`.
pub fn select_g(w: Association, g_star: f64) -> f64 {
    match w {
        Association::Unlikely => 1.0,
        Association::Associated | Association::Unknown => g_star,
    }
}

/// Prior mean of the coefficients.
///
/// Associated pairs put mean 1 (or the adaptive `ξ`) on the partner level and
/// integral coefficients; everything else, and the autoregressive model
/// always, is centred at zero.
pub fn prior_mean(w: Association, variant: ModelVariant, adaptive_xi: Option<f64>) -> DVector<f64> {
    let mut beta0 = DVector::zeros(variant.p());
    if w == Association::Associated {
        match variant {
            ModelVariant::Full => {
                let xi = adaptive_xi.unwrap_or(1.0);
                beta0[0] = xi;
                beta0[1] = xi;
            }
            ModelVariant::Other => {
                beta0[0] = 1.0;
                beta0[1] = 1.0;
            }
            ModelVariant::Own => {}
        }
    }
    beta0
}
