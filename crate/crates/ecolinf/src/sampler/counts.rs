//! Margin-preserving Metropolis moves on one unit's latent cell table.
//!
//! A proposal picks two distinct rows (among rows with positive totals), two
//! distinct columns, a magnitude delta in 1..=delta_max and a sign, and adds
//! +/-delta in the 2x2 swap pattern. Row and column sums are untouched by
//! construction; a move is rejected outright if it would push any latent cell
//! below its floor (the surveyed count in-sample, zero otherwise). The
//! proposal is symmetric, so acceptance only needs the target ratio.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::logit::ThetaRow;
use crate::mathutil::{ln_factorial, LnFactTable};

/// Log conditional density (up to constants) of one unit's latent table given
/// theta: sum over cells of m ln(theta) - ln(m!), where m is the unsurveyed
/// remainder N - K in-sample and the full count out-of-sample. Errors if any
/// implied remainder is negative.
pub fn log_conditional_counts(
    cells: &[i64],
    k: Option<&[i64]>,
    theta: &[ThetaRow],
) -> Result<f64> {
    let n_choices = theta.first().map(|t| t.probs().len()).unwrap_or(0);
    if theta.is_empty() || cells.len() != theta.len() * n_choices {
        return Err(Error::config("cells and theta shapes disagree"));
    }
    if let Some(k) = k {
        if k.len() != cells.len() {
            return Err(Error::config("survey vector length mismatch"));
        }
    }
    let mut total = 0.0;
    for (idx, &n) in cells.iter().enumerate() {
        let floor = k.map_or(0, |k| k[idx]);
        let m = n - floor;
        if m < 0 {
            return Err(Error::data(format!(
                "cell {idx} implies negative unsurveyed count {m}"
            )));
        }
        let p = theta[idx / n_choices].probs()[idx % n_choices];
        if m > 0 {
            total += m as f64 * p.ln();
        }
        total -= ln_factorial(m);
    }
    Ok(total)
}

/// Run `n_moves` swap proposals on one unit. `log_theta` is the current
/// row-major table of ln(theta_rc); `floors` is the surveyed table (zeros out
/// of sample). Returns (proposed, accepted).
#[allow(clippy::too_many_arguments)]
pub(crate) fn counts_moves(
    cells: &mut [i64],
    floors: Option<&[i64]>,
    log_theta: &[f64],
    active_rows: &[u32],
    n_choices: usize,
    delta_max: i64,
    n_moves: usize,
    lnfact: &LnFactTable,
    rng: &mut ChaCha8Rng,
) -> (u64, u64) {
    let n_active = active_rows.len();
    if n_active < 2 || n_choices < 2 {
        return (0, 0); // table is a single live row; margins pin every cell
    }
    let floor_at = |idx: usize| floors.map_or(0, |f| f[idx]);
    let mut accepted = 0u64;
    for _ in 0..n_moves {
        let r1i = rng.random_range(0..n_active);
        let mut r2i = rng.random_range(0..n_active - 1);
        if r2i >= r1i {
            r2i += 1;
        }
        let r1 = active_rows[r1i] as usize;
        let r2 = active_rows[r2i] as usize;
        let c1 = rng.random_range(0..n_choices);
        let mut c2 = rng.random_range(0..n_choices - 1);
        if c2 >= c1 {
            c2 += 1;
        }
        let delta = {
            let mag = rng.random_range(1..=delta_max);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        };
        // The four touched cells and their increments.
        let touched = [
            (r1 * n_choices + c1, delta),
            (r1 * n_choices + c2, -delta),
            (r2 * n_choices + c1, -delta),
            (r2 * n_choices + c2, delta),
        ];
        // Feasibility first: every touched cell must stay at or above its
        // floor. Only then is every m_new within the margins (and within the
        // factorial table's range).
        if touched
            .iter()
            .any(|&(idx, d)| cells[idx] - floor_at(idx) + d < 0)
        {
            continue;
        }
        let mut log_ratio = 0.0;
        for &(idx, d) in &touched {
            let m_old = cells[idx] - floor_at(idx);
            let m_new = m_old + d;
            log_ratio += d as f64 * log_theta[idx] + lnfact.get(m_old) - lnfact.get(m_new);
        }
        if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
            for &(idx, d) in &touched {
                cells[idx] += d;
            }
            accepted += 1;
        }
    }
    (n_moves as u64, accepted)
}
