//! Small numeric helpers shared across modules.

use nalgebra::{Cholesky, DMatrix, Dyn};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Precomputed table of ln(k!) for k in 0..=max.
///
/// The counts kernel evaluates ln m! for every proposed cell; a lookup table
/// keeps that O(1) with no transcendental calls in the hot loop.
#[derive(Debug, Clone)]
pub struct LnFactTable {
    vals: Vec<f64>,
}

impl LnFactTable {
    pub fn up_to(max: usize) -> Self {
        let mut vals = Vec::with_capacity(max + 1);
        let mut acc = 0.0f64;
        vals.push(0.0);
        for k in 1..=max {
            acc += (k as f64).ln();
            vals.push(acc);
        }
        LnFactTable { vals }
    }

    #[inline]
    pub fn get(&self, k: i64) -> f64 {
        debug_assert!(k >= 0);
        self.vals[k as usize]
    }

    pub fn max(&self) -> usize {
        self.vals.len() - 1
    }
}

/// ln(k!) without a table; fine off the hot path.
pub fn ln_factorial(k: i64) -> f64 {
    debug_assert!(k >= 0);
    ln_gamma(k as f64 + 1.0)
}

/// Linear-interpolation quantile on order statistics (the convention R calls
/// type 7). `sorted` must be ascending and non-empty; `p` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    debug_assert!((0.0..=1.0).contains(&p));
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = lo.min(n - 2) + 1;
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Round non-negative reals to integers summing to `total`, by largest
/// remainder: floor everything, then hand out the shortfall in order of
/// descending fractional part (ties broken by index, so the result is
/// deterministic).
pub fn largest_remainder_round(xs: &[f64], total: i64) -> Vec<i64> {
    debug_assert!(xs.iter().all(|&x| x >= 0.0));
    let mut out: Vec<i64> = xs.iter().map(|&x| x.floor() as i64).collect();
    let assigned: i64 = out.iter().sum();
    let mut short = total - assigned;
    debug_assert!(short >= 0, "floor sum exceeds total");
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = xs[a] - xs[a].floor();
        let fb = xs[b] - xs[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut i = 0;
    while short > 0 {
        out[order[i % order.len()]] += 1;
        short -= 1;
        i += 1;
    }
    out
}

/// Cholesky of a symmetric matrix, adding `1e-10 * trace * I` once if the
/// factorization fails. Returns the factor and whether jitter was applied.
pub fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, bool)> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, false));
    }
    let d = m.nrows();
    let eps = 1e-10 * m.trace().abs().max(1.0);
    let mut jittered = m.clone();
    for i in 0..d {
        jittered[(i, i)] += eps;
    }
    match Cholesky::new(jittered) {
        Some(c) => Ok((c, true)),
        None => Err(Error::data(
            "matrix not positive definite even after jitter",
        )),
    }
}

/// Force exact symmetry (averages off-diagonal pairs); cheap insurance against
/// drift from repeated triangular products.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
