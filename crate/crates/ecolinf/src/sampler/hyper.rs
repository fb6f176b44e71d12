//! Conjugate updates of the population mean and covariance.
//!
//! Given the current unit logit vectors omega_1..omega_I:
//!
//! - mu | Sigma, omega ~ N(Lambda b, Lambda) with
//!   Lambda = (kappa0^{-1} + I Sigma^{-1})^{-1} and
//!   b = kappa0^{-1} mu0 + Sigma^{-1} sum_i omega_i;
//! - Sigma | mu, omega ~ inverse-Wishart(nu0 + I, psi0 + S) with scatter
//!   S = sum_i (omega_i - mu)(omega_i - mu)'.
//!
//! The inverse-Wishart draw goes through the Bartlett decomposition of the
//! corresponding Wishart on the inverted scale matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mathutil::{cholesky_with_jitter, symmetrize};
use crate::sampler::HyperPrior;

/// Draw mu from its full conditional. `kappa0_inv` and `kappa0_inv_mu0` are
/// the precomputed prior precision pieces; `sigma_inv` the current population
/// precision; `sum_omega` the sum of unit logit vectors over `n_units` units.
pub fn draw_mu_given_sigma(
    kappa0_inv: &DMatrix<f64>,
    kappa0_inv_mu0: &DVector<f64>,
    sigma_inv: &DMatrix<f64>,
    sum_omega: &DVector<f64>,
    n_units: usize,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    let d = sum_omega.len();
    let precision = kappa0_inv + sigma_inv * n_units as f64;
    let (chol, _) = cholesky_with_jitter(&precision)?;
    let b = kappa0_inv_mu0 + sigma_inv * sum_omega;
    let mean = chol.solve(&b);
    // x = L^{-T} z has covariance (L L')^{-1} = precision^{-1}.
    let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::data("singular precision factor in mu update"))?;
    Ok(mean + x)
}

/// Draw Sigma from its full conditional given mu. Returns the draw and
/// whether the scatter needed jitter to factor (logged by the caller).
pub fn draw_sigma_given_mu<'a>(
    omegas: impl Iterator<Item = &'a DVector<f64>>,
    mu: &DVector<f64>,
    prior: &HyperPrior,
    rng: &mut ChaCha8Rng,
) -> Result<(DMatrix<f64>, bool)> {
    let mut scale = prior.psi0.clone();
    let mut n_units = 0usize;
    for w in omegas {
        let diff = w - mu;
        // scale += diff diff'
        scale.ger(1.0, &diff, &diff, 1.0);
        n_units += 1;
    }
    symmetrize(&mut scale);
    let nu = prior.nu0 + n_units as f64;
    let (chol, jittered) = cholesky_with_jitter(&scale)?;
    let sigma = inverse_wishart_from_chol(&chol.l(), nu, rng)?;
    Ok((sigma, jittered))
}

/// Inverse-Wishart(nu, Psi) draw given the lower Cholesky factor of Psi.
///
/// Bartlett: A lower-triangular with A_ii^2 ~ chi^2(nu - i) (0-based) and
/// standard normals below the diagonal gives A A' ~ Wishart(nu, I), so
/// Sigma = L_Psi (A A')^{-1} L_Psi' = U' U with U = A^{-1} L_Psi' is an
/// inverse-Wishart(nu, Psi) draw.
pub fn inverse_wishart_from_chol(
    l_psi: &DMatrix<f64>,
    nu: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DMatrix<f64>> {
    let d = l_psi.nrows();
    if !(nu > (d - 1) as f64) {
        return Err(Error::config(format!(
            "inverse-Wishart needs nu > d - 1 = {} (got {nu})",
            d - 1
        )));
    }
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(nu - i as f64)
            .map_err(|e| Error::config(format!("chi-squared setup failed: {e}")))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let u = a
        .solve_lower_triangular(&l_psi.transpose())
        .ok_or_else(|| Error::data("degenerate Bartlett factor"))?;
    let mut sigma = u.transpose() * u;
    symmetrize(&mut sigma);
    Ok(sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngstream::stream;

    /// E[Sigma] under inverse-Wishart(nu, Psi) is Psi / (nu - d - 1).
    #[test]
    fn inverse_wishart_mean() {
        let psi = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let nu = 7.0;
        let l = psi.clone().cholesky().unwrap().l();
        let mut rng = stream(11, &[1]);
        let n = 40_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            acc += inverse_wishart_from_chol(&l, nu, &mut rng).unwrap();
        }
        let mean = acc / n as f64;
        let want = psi / (nu - 3.0);
        assert!((&mean - want).abs().max() < 0.02, "{mean}");
    }

    /// With an effectively flat prior (huge kappa0) and one unit, the
    /// conditional mean of mu collapses onto that unit's omega.
    #[test]
    fn flat_prior_mu_tracks_single_omega() {
        let d = 2;
        let kappa0_inv = DMatrix::identity(d, d) * 1e-12;
        let kappa0_inv_mu0 = DVector::zeros(d);
        let sigma = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, 0.2]);
        let sigma_inv = sigma.try_inverse().unwrap();
        let omega1 = DVector::from_column_slice(&[1.4, -0.8]);
        let mut rng = stream(5, &[9]);
        let n = 50_000;
        let mut acc = DVector::zeros(d);
        for _ in 0..n {
            acc += draw_mu_given_sigma(
                &kappa0_inv,
                &kappa0_inv_mu0,
                &sigma_inv,
                &omega1,
                1,
                &mut rng,
            )
            .unwrap();
        }
        let mean = acc / n as f64;
        assert!((&mean - omega1).abs().max() < 0.01, "{mean}");
    }
}
