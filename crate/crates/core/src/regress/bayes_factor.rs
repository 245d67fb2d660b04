use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Covariate count of the full model (intercept excluded).
pub const DEFAULT_P_COV: usize = 4;

/// Kass–Raftery reading of `log₁₀ BF`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evidence {
    /// `log₁₀ BF < 0`: favours the intercept-only model.
    Negative,
    /// `[0, 0.5)`
    Weak,
    /// `[0.5, 1)`
    Substantial,
    /// `[1, 2)`
    Strong,
    /// `≥ 2`
    Decisive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesFactor {
    pub value: f64,
    pub log10: f64,
}

impl BayesFactor {
    pub fn evidence(&self) -> Evidence {
        match self.log10 {
            x if x < 0.0 => Evidence::Negative,
            x if x < 0.5 => Evidence::Weak,
            x if x < 1.0 => Evidence::Substantial,
            x if x < 2.0 => Evidence::Strong,
            _ => Evidence::Decisive,
        }
    }
}

/// Bayes factor of the full model against intercept-only under a g-prior:
///
/// `(1 + g)^((n − p − 1)/2) · (1 + g(1 − R²))^(−(n − 1)/2)`
///
/// evaluated in log space. `R² = 1` gives the finite limit `(1 + g)^((n−p−1)/2)`.
pub fn bayes_factor(r2: f64, g: f64, n: usize, p_cov: usize) -> Result<BayesFactor> {
    if !(0.0..=1.0).contains(&r2) {
        return Err(Error::InvalidArgument(format!("R² must lie in [0, 1], got {r2}")));
    }
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::InvalidArgument(format!("g must be positive and finite, got {g}")));
    }
    let ln = 0.5 * (n as f64 - p_cov as f64 - 1.0) * g.ln_1p() - 0.5 * (n as f64 - 1.0) * (g * (1.0 - r2)).ln_1p();
    Ok(BayesFactor {
        value: ln.exp(),
        log10: ln / std::f64::consts::LN_10,
    })
}
