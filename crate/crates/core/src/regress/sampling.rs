use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{variance_ratio_r2, DesignPair, PosteriorFit};
use crate::error::{Error, Result};

/// Posterior simulation output: one row of coefficients per draw and the
/// Bayesian R² each draw implies.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub betas: DMatrix<f64>,
    pub r2: Vec<f64>,
}

/// Draws `σ² ~ InvGamma(a*, b*)` then `β ~ N(β*, g σ² V*)`, `k` times.
///
/// With `null_prior` the centre is recomputed with `β₀ = 0`, giving the
/// R² distribution under no prior association. Draws are a pure function of
/// `seed`.
pub fn sample_posterior(
    fit: &PosteriorFit,
    d: &DesignPair,
    k: usize,
    seed: u64,
    null_prior: bool,
) -> Result<PosteriorDraws> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    if !(fit.a_star > 0.0 && fit.b_star > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "posterior shape and scale must be positive, got a* = {}, b* = {}",
            fit.a_star, fit.b_star
        )));
    }
    let p = fit.beta_star.len();
    let centre = if null_prior {
        &fit.beta_ols * (fit.g / (1.0 + fit.g))
    } else {
        fit.beta_star.clone()
    };

    // Symmetric square root of V*; tiny negative eigenvalues are rounding.
    let eig = SymmetricEigen::new(fit.v_star.clone());
    let root = DMatrix::from_fn(p, p, |r, c| eig.eigenvectors[(r, c)] * eig.eigenvalues[c].max(0.0).sqrt());

    let gamma = Gamma::new(fit.a_star, 1.0 / fit.b_star)
        .map_err(|e| Error::InvalidArgument(format!("inverse-gamma parameters: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut betas = DMatrix::zeros(k, p);
    let mut r2 = Vec::with_capacity(k);
    let y = d.y().as_slice();
    for draw in 0..k {
        let sigma2 = 1.0 / gamma.sample(&mut rng);
        let z = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut rng));
        let beta = &centre + &root * z * (fit.g * sigma2).sqrt();
        let fitted = d.x() * &beta;
        r2.push(variance_ratio_r2(fitted.as_slice(), y).value);
        betas.set_row(draw, &beta.transpose());
    }
    Ok(PosteriorDraws { betas, r2 })
}
