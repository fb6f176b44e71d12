//! Jurisdiction-level quantities computed from latent cell tables, plus the
//! posterior summaries reported for them.
//!
//! For jurisdiction totals T_rc = sum over units of the latent cells:
//! - support `lambda_rc`: share of race r's actual voters choosing c
//!   (non-Abstain c only);
//! - composition `gamma_r`: race r's share of all actual voters;
//! - turnout `tau_r`: the fraction of race r's population that voted.
//!
//! A zero denominator (for example, a race with no voters anywhere) makes the
//! affected entries undefined; they are carried as NaN and excluded from
//! summaries, with the exclusion count reported.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dimensions;
use crate::error::{Error, Result};
use crate::mathutil::quantile_sorted;

/// Point values for every estimand at one draw (or at the truth).
/// `lambda` is race-major over non-Abstain choices; NaN marks undefined
/// entries.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimandSet {
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub turnout: Vec<f64>,
}

impl EstimandSet {
    pub fn lambda_at(&self, dims: &Dimensions, race: usize, choice: usize) -> f64 {
        self.lambda[dims.omega_coord(race, choice)]
    }

    /// Values flattened in the order of [`estimand_labels`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.lambda.len() + self.gamma.len() + self.turnout.len());
        out.extend_from_slice(&self.lambda);
        out.extend_from_slice(&self.gamma);
        out.extend_from_slice(&self.turnout);
        out
    }
}

/// Labels matching [`EstimandSet::flatten`]: `lambda_<race>_<choice>` for
/// non-Abstain choices, then `gamma_<race>`, then `turnout_<race>`.
pub fn estimand_labels(dims: &Dimensions) -> Vec<String> {
    let mut out = Vec::with_capacity(dims.omega_dim() + 2 * dims.n_races());
    for r in dims.races() {
        for c in &dims.choices()[..dims.abstain_col()] {
            out.push(format!("lambda_{r}_{c}"));
        }
    }
    for r in dims.races() {
        out.push(format!("gamma_{r}"));
    }
    for r in dims.races() {
        out.push(format!("turnout_{r}"));
    }
    out
}

/// Estimands from jurisdiction cell totals (row-major R x C).
pub fn compute_estimands_from_totals(totals: &[i64], dims: &Dimensions) -> EstimandSet {
    let nc = dims.n_choices();
    let nr = dims.n_races();
    let ab = dims.abstain_col();
    debug_assert_eq!(totals.len(), nr * nc);
    let ratio = |num: i64, den: i64| if den == 0 { f64::NAN } else { num as f64 / den as f64 };

    let mut pop_r = vec![0i64; nr];
    let mut voters_r = vec![0i64; nr];
    for r in 0..nr {
        for c in 0..nc {
            pop_r[r] += totals[r * nc + c];
        }
        voters_r[r] = pop_r[r] - totals[r * nc + ab];
    }
    let total_voters: i64 = voters_r.iter().sum();

    let mut lambda = Vec::with_capacity(nr * (nc - 1));
    for r in 0..nr {
        for c in 0..ab {
            lambda.push(ratio(totals[r * nc + c], voters_r[r]));
        }
    }
    let gamma = voters_r.iter().map(|&v| ratio(v, total_voters)).collect();
    let turnout = (0..nr).map(|r| ratio(voters_r[r], pop_r[r])).collect();
    EstimandSet { lambda, gamma, turnout }
}

/// Estimands from per-unit cell tables (summed into jurisdiction totals
/// first, so units and any super-unit partition of them give identical
/// results).
pub fn compute_estimands<'a, I>(per_unit_cells: I, dims: &Dimensions) -> EstimandSet
where
    I: IntoIterator<Item = &'a [i64]>,
{
    let mut totals = vec![0i64; dims.n_cells()];
    for cells in per_unit_cells {
        debug_assert_eq!(cells.len(), totals.len());
        for (t, &c) in totals.iter_mut().zip(cells) {
            *t += c;
        }
    }
    compute_estimands_from_totals(&totals, dims)
}

/// Posterior summary of one scalar: mean plus an equal-tailed interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    /// Draws the summary used (after dropping undefined ones).
    pub n_draws: usize,
    /// Undefined draws excluded.
    pub n_missing: usize,
}

/// Mean and equal-tailed interval of `draws` at the given level. NaN draws
/// (undefined estimands) are excluded and counted; errors if nothing is left
/// or the level is not in (0, 1).
pub fn summarize(draws: &[f64], level: f64) -> Result<Summary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("interval level {level} outside (0, 1)")));
    }
    let mut kept: Vec<f64> = draws.iter().copied().filter(|x| !x.is_nan()).collect();
    let n_missing = draws.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::data("no defined draws to summarize"));
    }
    kept.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let point = kept.iter().sum::<f64>() / kept.len() as f64;
    let tail = (1.0 - level) / 2.0;
    Ok(Summary {
        point,
        lo: quantile_sorted(&kept, tail),
        hi: quantile_sorted(&kept, 1.0 - tail),
        level,
        n_draws: kept.len(),
        n_missing,
    })
}

/// Summaries of the between-race correlation blocks of the population
/// covariance. For races a < b, entry (i, j) is the posterior summary of
/// corr(omega_{a,i}, omega_{b,j}) over the non-Abstain choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBlock {
    pub race_a: String,
    pub race_b: String,
    /// Row-major (C-1) x (C-1): (choice under race_a, choice under race_b).
    pub entries: Vec<CorrelationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub choice_a: String,
    pub choice_b: String,
    pub summary: Summary,
}

/// Turn covariance draws into correlation matrices and summarize every
/// between-race block entry.
pub fn correlation_blocks(
    sigma_draws: &[DMatrix<f64>],
    dims: &Dimensions,
    level: f64,
) -> Result<Vec<CorrelationBlock>> {
    if sigma_draws.is_empty() {
        return Err(Error::data("no covariance draws"));
    }
    let d = dims.omega_dim();
    let k = dims.n_choices() - 1;
    for s in sigma_draws {
        if s.nrows() != d || s.ncols() != d {
            return Err(Error::config("covariance draw has the wrong dimension"));
        }
    }
    let corr_entry = |s: &DMatrix<f64>, i: usize, j: usize| -> f64 {
        let den = (s[(i, i)] * s[(j, j)]).sqrt();
        if den > 0.0 {
            s[(i, j)] / den
        } else {
            f64::NAN
        }
    };
    let mut out = Vec::new();
    for a in 0..dims.n_races() {
        for b in (a + 1)..dims.n_races() {
            let mut entries = Vec::with_capacity(k * k);
            for i in 0..k {
                for j in 0..k {
                    let vals: Vec<f64> = sigma_draws
                        .iter()
                        .map(|s| corr_entry(s, a * k + i, b * k + j))
                        .collect();
                    entries.push(CorrelationEntry {
                        choice_a: dims.choices()[i].clone(),
                        choice_b: dims.choices()[j].clone(),
                        summary: summarize(&vals, level)?,
                    });
                }
            }
            out.push(CorrelationBlock {
                race_a: dims.races()[a].clone(),
                race_b: dims.races()[b].clone(),
                entries,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ABSTAIN;
    use proptest::prelude::*;

    fn dims() -> Dimensions {
        Dimensions::new(
            vec!["black".into(), "white".into()],
            vec!["dem".into(), "rep".into(), ABSTAIN.into()],
        )
        .unwrap()
    }

    #[test]
    fn hand_worked_totals() {
        // totals: black (30 dem, 10 rep, 60 abstain), white (20, 60, 20)
        let d = dims();
        let set = compute_estimands_from_totals(&[30, 10, 60, 20, 60, 20], &d);
        assert!((set.lambda_at(&d, 0, 0) - 0.75).abs() < 1e-12); // 30/40
        assert!((set.lambda_at(&d, 0, 1) - 0.25).abs() < 1e-12);
        assert!((set.lambda_at(&d, 1, 0) - 0.25).abs() < 1e-12); // 20/80
        assert!((set.gamma[0] - 40.0 / 120.0).abs() < 1e-12);
        assert!((set.gamma[1] - 80.0 / 120.0).abs() < 1e-12);
        assert!((set.turnout[0] - 0.4).abs() < 1e-12);
        assert!((set.turnout[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_are_nan() {
        let d = dims();
        // white row entirely abstain -> no white voters
        let set = compute_estimands_from_totals(&[30, 10, 60, 0, 0, 50], &d);
        assert!(set.lambda_at(&d, 1, 0).is_nan());
        assert!(set.lambda_at(&d, 1, 1).is_nan());
        assert!(!set.gamma[1].is_nan()); // 0 / 40 is defined
        assert_eq!(set.gamma[1], 0.0);
        assert!((set.turnout[1]).abs() < 1e-12);
        // nobody votes at all -> gamma undefined everywhere
        let set = compute_estimands_from_totals(&[0, 0, 60, 0, 0, 50], &d);
        assert!(set.gamma.iter().all(|g| g.is_nan()));
    }

    #[test]
    fn summarize_counts_missing_draws() {
        let draws = [0.2, f64::NAN, 0.4, 0.6, f64::NAN];
        let s = summarize(&draws, 0.9).unwrap();
        assert_eq!(s.n_draws, 3);
        assert_eq!(s.n_missing, 2);
        assert!((s.point - 0.4).abs() < 1e-12);
        assert!(summarize(&[f64::NAN], 0.9).is_err());
        assert!(summarize(&[1.0], 1.0).is_err());
    }

    #[test]
    fn summarize_interval_matches_worked_example() {
        let draws: Vec<f64> = (1..=100).map(|k| k as f64).collect();
        let s = summarize(&draws, 0.90).unwrap();
        assert!((s.lo - 5.95).abs() < 1e-12);
        assert!((s.hi - 95.05).abs() < 1e-12);
    }

    #[test]
    fn correlation_blocks_shape_and_values() {
        let d = dims();
        // One draw with a known structure.
        let s = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 0.5, 0.0, //
                0.0, 4.0, 0.0, -1.0, //
                0.5, 0.0, 1.0, 0.0, //
                0.0, -1.0, 0.0, 1.0,
            ],
        );
        let blocks = correlation_blocks(&[s], &d, 0.95).unwrap();
        assert_eq!(blocks.len(), 1);
        let b = &blocks[0];
        assert_eq!(b.race_a, "black");
        assert_eq!(b.race_b, "white");
        assert_eq!(b.entries.len(), 4);
        // corr(black dem, white dem) = 0.5 / sqrt(1*1)
        assert!((b.entries[0].summary.point - 0.5).abs() < 1e-12);
        // corr(black rep, white rep) = -1 / sqrt(4*1)
        assert!((b.entries[3].summary.point + 0.5).abs() < 1e-12);
    }

    proptest! {
        /// Splitting units arbitrarily does not move jurisdiction estimands,
        /// and defined lambdas stay in [0,1] summing to 1 across choices.
        #[test]
        fn aggregation_invariance(
            cells in proptest::collection::vec(0i64..40, 6),
            split in proptest::collection::vec(0i64..40, 6),
        ) {
            let d = dims();
            let merged: Vec<i64> = cells.iter().zip(&split).map(|(a, b)| a + b).collect();
            let one = compute_estimands(vec![merged.as_slice()], &d);
            let two = compute_estimands(vec![cells.as_slice(), split.as_slice()], &d);
            for (x, y) in one.flatten().iter().zip(two.flatten()) {
                prop_assert!((x.is_nan() && y.is_nan()) || (x - y).abs() < 1e-12);
            }
            for r in 0..2 {
                let s: f64 = (0..2).map(|c| one.lambda_at(&d, r, c)).sum();
                if !s.is_nan() {
                    prop_assert!((s - 1.0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn correlations_bounded(seed in 0u64..1000) {
            use crate::rngstream::stream;
            use rand::Rng;
            let d = dims();
            let mut rng = stream(seed, &[0]);
            // Random SPD matrix A A' + eps I.
            let a = DMatrix::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
            let s = &a * a.transpose() + DMatrix::identity(4, 4) * 0.01;
            let blocks = correlation_blocks(&[s], &d, 0.5).unwrap();
            for b in blocks {
                for e in b.entries {
                    prop_assert!(e.summary.point.abs() <= 1.0 + 1e-9);
                }
            }
        }
    }
}
