//! Additive log-ratio transform between per-race choice probabilities and the
//! unconstrained vector the Gaussian hierarchy lives on.
//!
//! For each race r with choice probabilities theta_r (length C, Abstain
//! last), the transform stacks omega_{rc} = ln(theta_{rc} / theta_{rA}) for
//! the C-1 non-Abstain choices, race-major, into a single vector of dimension
//! R*(C-1). The inverse is a softmax with an implicit zero coordinate for
//! Abstain.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mathutil::cholesky_with_jitter;

/// One race's choice probabilities: strictly positive, summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaRow {
    probs: Vec<f64>,
}

impl ThetaRow {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::config("a probability row needs at least two entries"));
        }
        if probs.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::config("probabilities must be strictly positive"));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-8 {
            return Err(Error::config(format!("probabilities sum to {s}, not 1")));
        }
        Ok(ThetaRow { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// Stack log-ratios against the last (Abstain) entry of each row.
pub fn to_omega(rows: &[ThetaRow]) -> Result<Vec<f64>> {
    if rows.is_empty() {
        return Err(Error::config("no probability rows"));
    }
    let c = rows[0].probs.len();
    if rows.iter().any(|r| r.probs.len() != c) {
        return Err(Error::config("probability rows have unequal lengths"));
    }
    let mut out = Vec::with_capacity(rows.len() * (c - 1));
    for row in rows {
        let reference = row.probs[c - 1];
        for &p in &row.probs[..c - 1] {
            out.push((p / reference).ln());
        }
    }
    Ok(out)
}

/// Log choice probabilities for one race given its slice of omega
/// (length C-1). Writes C values into `out` (Abstain last). Stable for any
/// finite omega via max-subtraction.
#[inline]
pub(crate) fn row_log_probs(omega_row: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), omega_row.len() + 1);
    let mut m = 0.0f64; // implicit Abstain coordinate
    for &w in omega_row {
        if w > m {
            m = w;
        }
    }
    let mut s = (-m).exp();
    for &w in omega_row {
        s += (w - m).exp();
    }
    let lse = m + s.ln();
    for (o, &w) in out.iter_mut().zip(omega_row) {
        *o = w - lse;
    }
    out[omega_row.len()] = -lse;
}

/// Inverse transform: omega (length R*(C-1)) back to per-race probability
/// rows.
pub fn to_theta(omega: &[f64], n_races: usize, n_choices: usize) -> Result<Vec<ThetaRow>> {
    let k = n_choices - 1;
    if omega.len() != n_races * k {
        return Err(Error::config(format!(
            "omega has length {}, expected {}",
            omega.len(),
            n_races * k
        )));
    }
    let mut rows = Vec::with_capacity(n_races);
    let mut logp = vec![0.0; n_choices];
    for r in 0..n_races {
        row_log_probs(&omega[r * k..(r + 1) * k], &mut logp);
        rows.push(ThetaRow { probs: logp.iter().map(|&l| l.exp()).collect() });
    }
    Ok(rows)
}

fn check_target_shapes(
    omega: &[f64],
    cells: &[i64],
    n_races: usize,
    n_choices: usize,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<()> {
    let d = n_races * (n_choices - 1);
    if omega.len() != d || mu.len() != d || sigma.nrows() != d || sigma.ncols() != d {
        return Err(Error::config("omega/mu/sigma dimensions disagree"));
    }
    if cells.len() != n_races * n_choices {
        return Err(Error::config("cell count vector has the wrong length"));
    }
    Ok(())
}

/// Log density (up to an additive constant) of one unit's logit vector given
/// its latent cell counts and the population parameters:
///
/// sum_rc n_rc * ln theta_rc(omega)  -  (omega - mu)' Sigma^{-1} (omega - mu) / 2
///
/// The count term uses the full latent cells; constants not involving omega
/// (factorials, the Gaussian normalizer) are dropped.
pub fn log_target_omega(
    omega: &[f64],
    cells: &[i64],
    n_races: usize,
    n_choices: usize,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<f64> {
    check_target_shapes(omega, cells, n_races, n_choices, mu, sigma)?;
    let (chol, _) = cholesky_with_jitter(sigma)?;
    let diff = DVector::from_column_slice(omega) - mu;
    let quad = diff.dot(&chol.solve(&diff));
    Ok(count_log_lik(omega, cells, n_races, n_choices) - 0.5 * quad)
}

/// The count part of the target: sum_rc n_rc ln theta_rc(omega).
pub(crate) fn count_log_lik(omega: &[f64], cells: &[i64], n_races: usize, n_choices: usize) -> f64 {
    let k = n_choices - 1;
    let mut total = 0.0;
    let mut logp = vec![0.0; n_choices];
    for r in 0..n_races {
        row_log_probs(&omega[r * k..(r + 1) * k], &mut logp);
        for c in 0..n_choices {
            let n = cells[r * n_choices + c];
            if n != 0 {
                total += n as f64 * logp[c];
            }
        }
    }
    total
}

/// Analytic gradient of [`log_target_omega`] with respect to omega. For the
/// coordinate (r, c): n_rc - N_r * theta_rc - [Sigma^{-1}(omega - mu)]_rc.
pub fn grad_log_target_omega(
    omega: &[f64],
    cells: &[i64],
    n_races: usize,
    n_choices: usize,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    check_target_shapes(omega, cells, n_races, n_choices, mu, sigma)?;
    let (chol, _) = cholesky_with_jitter(sigma)?;
    let diff = DVector::from_column_slice(omega) - mu;
    let mut grad = -chol.solve(&diff);
    let k = n_choices - 1;
    let mut logp = vec![0.0; n_choices];
    for r in 0..n_races {
        row_log_probs(&omega[r * k..(r + 1) * k], &mut logp);
        let n_r: i64 = (0..n_choices).map(|c| cells[r * n_choices + c]).sum();
        for c in 0..k {
            grad[r * k + c] += cells[r * n_choices + c] as f64 - n_r as f64 * logp[c].exp();
        }
    }
    Ok(grad)
}
