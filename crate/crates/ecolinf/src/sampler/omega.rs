//! Per-unit Gaussian random-walk update of the logit vector.
//!
//! The proposal is omega' = omega + scale * L z with z standard normal and
//! L the Cholesky factor of the current population covariance, so the walk
//! follows the hierarchy's own correlation structure. During burn-in the
//! per-unit scale adapts on the log scale toward 23.4% acceptance with a
//! Robbins-Monro step of size t^{-0.6}; after burn-in the scale is frozen,
//! leaving a fixed, valid Metropolis kernel.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::logit::count_log_lik;

/// Acceptance rate the adaptation drives toward.
pub const TARGET_ACCEPT: f64 = 0.234;

/// Log target for one unit up to constants: count likelihood plus the
/// Gaussian quadratic form (using a precomputed Sigma^{-1}).
#[inline]
pub(crate) fn unit_log_target(
    omega: &DVector<f64>,
    cells: &[i64],
    n_races: usize,
    n_choices: usize,
    mu: &DVector<f64>,
    sigma_inv: &DMatrix<f64>,
) -> f64 {
    let diff = omega - mu;
    let quad = diff.dot(&(sigma_inv * &diff));
    count_log_lik(omega.as_slice(), cells, n_races, n_choices) - 0.5 * quad
}

/// One Metropolis step on one unit's omega. Returns the realized acceptance
/// probability (used by the adaptation) and whether the move was taken.
#[allow(clippy::too_many_arguments)]
pub(crate) fn omega_step(
    omega: &mut DVector<f64>,
    cells: &[i64],
    n_races: usize,
    n_choices: usize,
    mu: &DVector<f64>,
    sigma_inv: &DMatrix<f64>,
    prop_l: &DMatrix<f64>,
    scale: f64,
    rng: &mut ChaCha8Rng,
) -> (f64, bool) {
    let d = omega.len();
    let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let proposal = &*omega + prop_l * z * scale;
    let cur = unit_log_target(omega, cells, n_races, n_choices, mu, sigma_inv);
    let new = unit_log_target(&proposal, cells, n_races, n_choices, mu, sigma_inv);
    let alpha = (new - cur).exp().min(1.0);
    let accept = rng.random::<f64>() < alpha;
    if accept {
        *omega = proposal;
    }
    (alpha, accept)
}

/// Robbins-Monro update of the log proposal scale toward [`TARGET_ACCEPT`].
/// `t` is the 1-based sweep index.
#[inline]
pub(crate) fn adapt_scale(scale: &mut f64, alpha: f64, t: u64) {
    let step = (t as f64).powf(-0.6);
    *scale = (scale.ln() + step * (alpha - TARGET_ACCEPT)).exp();
}
