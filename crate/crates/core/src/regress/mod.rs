//! Lead-lag regression: design assembly, least squares, Zellner g-prior
//! posterior with SURE-optimal `g`, the two R² definitions, Bayes factors and
//! posterior simulation.
//!
//! For a response gene A and partner gene B sampled on `t_1..t_n`, the full
//! model regresses `m_A(t)` on
//!
//! ```text
//! [ m_B(t), ∫m_B, ∫m_A, t, 1 ]
//! ```
//!
//! where the integrals run from `t_1` and come from spline interpolants. Two
//! three-column sub-models drop either A's own terms or all of B's terms.

mod bayes_factor;
mod ols;
mod posterior;
mod sampling;
mod shrinkage;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeseries::TimeGrid;

pub use bayes_factor::{bayes_factor, BayesFactor, Evidence, DEFAULT_P_COV};
pub use ols::{classic_r2, ols_fit, OlsFit};
pub use posterior::{bayesian_r2, posterior, posterior_with_ols, variance_ratio_r2, Hyperpriors, PosteriorFit};
pub use sampling::{sample_posterior, PosteriorDraws};
pub use shrinkage::{optimal_g, optimal_g_xi, prior_mean, select_g, sure, GBounds, GStar};

/// Which columns enter the design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    /// `[m_B, ∫m_B, ∫m_A, t, 1]`
    Full,
    /// Partner-only sub-model `[m_B, ∫m_B, 1]`.
    Other,
    /// Autoregressive sub-model `[∫m_A, t, 1]`.
    Own,
}

impl ModelVariant {
    /// Number of design columns.
    pub const fn p(self) -> usize {
        match self {
            ModelVariant::Full => 5,
            ModelVariant::Other | ModelVariant::Own => 3,
        }
    }
}

/// A response vector and its design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPair {
    x: DMatrix<f64>,
    y: DVector<f64>,
    variant: ModelVariant,
}

impl DesignPair {
    /// Wraps an arbitrary design. `x` must have `variant.p()` columns, more
    /// rows than columns, and an all-ones last column.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, variant: ModelVariant) -> Result<Self> {
        let (n, p) = x.shape();
        if p != variant.p() {
            return Err(Error::LengthMismatch {
                what: "design columns",
                expected: variant.p(),
                got: p,
            });
        }
        if y.len() != n {
            return Err(Error::LengthMismatch {
                what: "response",
                expected: n,
                got: y.len(),
            });
        }
        if n <= p {
            return Err(Error::InvalidArgument(format!(
                "{variant:?} model needs more than {p} time points, got {n}"
            )));
        }
        if x.column(p - 1).iter().any(|v| *v != 1.0) {
            return Err(Error::InvalidArgument("last design column must be all ones".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design".into()));
        }
        Ok(Self { x, y, variant })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }
}

/// Assembles the design for response A (`a_vals`) against partner B.
///
/// `int_a` and `int_b` are the cumulative integrals of the two series.
pub fn build_design(
    a_vals: &[f64],
    b_vals: &[f64],
    int_a: &[f64],
    int_b: &[f64],
    grid: &TimeGrid,
    variant: ModelVariant,
) -> Result<DesignPair> {
    let n = grid.len();
    for (what, v) in [("a_vals", a_vals), ("b_vals", b_vals), ("int_a", int_a), ("int_b", int_b)] {
        if v.len() != n {
            return Err(Error::LengthMismatch {
                what,
                expected: n,
                got: v.len(),
            });
        }
    }
    let t = grid.times();
    let ones = vec![1.0; n];
    let columns: Vec<&[f64]> = match variant {
        ModelVariant::Full => vec![b_vals, int_b, int_a, t, &ones],
        ModelVariant::Other => vec![b_vals, int_b, &ones],
        ModelVariant::Own => vec![int_a, t, &ones],
    };
    let x = DMatrix::from_fn(n, columns.len(), |r, c| columns[c][r]);
    DesignPair::new(x, DVector::from_column_slice(a_vals), variant)
}

/// Result of a variance-ratio computation; `degenerate` marks the guarded
/// zero-variance cases where the value is defined as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct R2 {
    pub value: f64,
    pub degenerate: bool,
}

impl R2 {
    pub(crate) const DEGENERATE: R2 = R2 {
        value: 0.0,
        degenerate: true,
    };

    pub(crate) fn ok(value: f64) -> Self {
        R2 {
            value,
            degenerate: false,
        }
    }
}
