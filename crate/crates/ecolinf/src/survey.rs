//! Design-based ratio estimation from the survey counts alone.
//!
//! Treats sampled precincts as first-stage clusters drawn with unequal
//! probabilities and the within-precinct respondents as a simple random
//! sample. Point estimates are weighted ratios; variances come from the
//! standard linearization for a stratified with-replacement design, and
//! intervals are normal-theory. This is the comparison baseline: it uses no
//! margin information from unsampled precincts.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{Dimensions, SurveyCounts};
use crate::error::{Error, Result};
use crate::estimands::EstimandSet;

/// One sampled cluster's design information.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignUnit {
    pub unit_id: String,
    /// Variance stratum; clusters are compared within strata.
    pub stratum: String,
    /// First-stage selection weight (typically an inverse inclusion
    /// probability).
    pub weight: f64,
    /// Within-cluster sampling fraction used to scale counts up to cluster
    /// totals.
    pub within_fraction: f64,
}

/// The design records for every sampled cluster.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurveyDesign {
    pub units: Vec<DesignUnit>,
}

impl SurveyDesign {
    /// Single-stratum design with equal weights and a common within-cluster
    /// fraction.
    pub fn equal_weight(unit_ids: &[String], within_fraction: f64) -> Self {
        SurveyDesign {
            units: unit_ids
                .iter()
                .map(|id| DesignUnit {
                    unit_id: id.clone(),
                    stratum: "all".into(),
                    weight: 1.0,
                    within_fraction,
                })
                .collect(),
        }
    }

    /// Single-stratum design weighted by inverse inclusion probabilities.
    pub fn from_inclusion_probs(
        unit_ids: &[String],
        probs: &[f64],
        within_fraction: f64,
    ) -> Result<Self> {
        if unit_ids.len() != probs.len() {
            return Err(Error::config("one inclusion probability per sampled unit required"));
        }
        let units = unit_ids
            .iter()
            .zip(probs)
            .map(|(id, &p)| {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(Error::data(format!(
                        "unit {id}: inclusion probability {p} outside (0, 1]"
                    )));
                }
                Ok(DesignUnit {
                    unit_id: id.clone(),
                    stratum: "all".into(),
                    weight: 1.0 / p,
                    within_fraction,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SurveyDesign { units })
    }

    fn find(&self, unit_id: &str) -> Option<&DesignUnit> {
        self.units.iter().find(|u| u.unit_id == unit_id)
    }
}

/// A single ratio estimand: which numerator and denominator to read off a
/// cell table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetEstimand {
    /// Share of race r's voters choosing c (non-Abstain).
    Lambda(usize, usize),
    /// Race r's share of all voters.
    Gamma(usize),
    /// Fraction of race r's population that voted.
    Turnout(usize),
}

impl TargetEstimand {
    /// Parse a label of the same form `estimand_labels` produces
    /// (`lambda_<race>_<choice>`, `gamma_<race>`, `turnout_<race>`), matching
    /// the dataset's actual race and choice names.
    pub fn parse(label: &str, dims: &Dimensions) -> Result<Self> {
        for (r, race) in dims.races().iter().enumerate() {
            for (c, choice) in dims.choices()[..dims.abstain_col()].iter().enumerate() {
                if label == format!("lambda_{race}_{choice}") {
                    return Ok(TargetEstimand::Lambda(r, c));
                }
            }
            if label == format!("gamma_{race}") {
                return Ok(TargetEstimand::Gamma(r));
            }
            if label == format!("turnout_{race}") {
                return Ok(TargetEstimand::Turnout(r));
            }
        }
        Err(Error::config(format!("unknown estimand label {label}")))
    }

    pub fn label(&self, dims: &Dimensions) -> String {
        match *self {
            TargetEstimand::Lambda(r, c) => {
                format!("lambda_{}_{}", dims.races()[r], dims.choices()[c])
            }
            TargetEstimand::Gamma(r) => format!("gamma_{}", dims.races()[r]),
            TargetEstimand::Turnout(r) => format!("turnout_{}", dims.races()[r]),
        }
    }

    /// The target's value in a computed estimand set.
    pub fn value_in(&self, set: &EstimandSet, dims: &Dimensions) -> f64 {
        match *self {
            TargetEstimand::Lambda(r, c) => set.lambda_at(dims, r, c),
            TargetEstimand::Gamma(r) => set.gamma[r],
            TargetEstimand::Turnout(r) => set.turnout[r],
        }
    }

    /// Numerator and denominator counts read off one unit's cell table.
    fn y_x(&self, cells: &[i64], dims: &Dimensions) -> (f64, f64) {
        let nc = dims.n_choices();
        let ab = dims.abstain_col();
        let row_voters = |r: usize| -> i64 {
            (0..nc).filter(|&c| c != ab).map(|c| cells[r * nc + c]).sum()
        };
        match *self {
            TargetEstimand::Lambda(r, c) => (cells[r * nc + c] as f64, row_voters(r) as f64),
            TargetEstimand::Gamma(r) => {
                let all: i64 = (0..dims.n_races()).map(row_voters).sum();
                (row_voters(r) as f64, all as f64)
            }
            TargetEstimand::Turnout(r) => {
                let pop: i64 = (0..nc).map(|c| cells[r * nc + c]).sum();
                (row_voters(r) as f64, pop as f64)
            }
        }
    }
}

/// A design-based point estimate with its normal-theory interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurveyEstimate {
    pub point: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub n_clusters: usize,
}

/// Weighted ratio estimate of `target` from survey counts.
///
/// Each cluster's counts are scaled by `weight / within_fraction`; the point
/// estimate is the ratio of scaled numerator to scaled denominator totals,
/// and the variance comes from linearized cluster residuals pooled within
/// strata (with-replacement form). Returns `Ok(None)` when the denominator
/// total is zero — the target is not observable from this sample. Errors if
/// any stratum has a single cluster, since no variance can be estimated.
pub fn survey_estimate(
    surveys: &[SurveyCounts],
    design: &SurveyDesign,
    target: TargetEstimand,
    dims: &Dimensions,
    level: f64,
) -> Result<Option<SurveyEstimate>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config("interval level must be in (0, 1)"));
    }
    if surveys.is_empty() {
        return Err(Error::data("no survey clusters"));
    }
    let mut wy = Vec::with_capacity(surveys.len());
    let mut wx = Vec::with_capacity(surveys.len());
    let mut strata = Vec::with_capacity(surveys.len());
    for s in surveys {
        let du = design
            .find(&s.unit_id)
            .ok_or_else(|| Error::data(format!("no design record for unit {}", s.unit_id)))?;
        let (y, x) = target.y_x(&s.counts, dims);
        if du.within_fraction <= 0.0 {
            if y != 0.0 || x != 0.0 {
                return Err(Error::data(format!(
                    "unit {}: nonzero survey counts with zero sampling fraction",
                    s.unit_id
                )));
            }
            wy.push(0.0);
            wx.push(0.0);
        } else {
            let scale = du.weight / du.within_fraction;
            wy.push(scale * y);
            wx.push(scale * x);
        }
        strata.push(du.stratum.clone());
    }
    let y_tot: f64 = wy.iter().sum();
    let x_tot: f64 = wx.iter().sum();
    if x_tot <= 0.0 {
        return Ok(None);
    }
    let point = y_tot / x_tot;

    // Linearized residuals, pooled within strata.
    let u: Vec<f64> = wy.iter().zip(&wx).map(|(a, b)| (a - point * b) / x_tot).collect();
    let mut by_stratum: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
    for (ui, h) in u.iter().zip(&strata) {
        by_stratum.entry(h.as_str()).or_default().push(*ui);
    }
    let mut var = 0.0;
    for (h, us) in &by_stratum {
        let n_h = us.len();
        if n_h < 2 {
            return Err(Error::data(format!(
                "variance not estimable: stratum {h} has a single sampled cluster"
            )));
        }
        let mean = us.iter().sum::<f64>() / n_h as f64;
        let ss: f64 = us.iter().map(|v| (v - mean) * (v - mean)).sum();
        var += n_h as f64 / (n_h as f64 - 1.0) * ss;
    }
    let se = var.sqrt();
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    Ok(Some(SurveyEstimate {
        point,
        se,
        lo: point - z * se,
        hi: point + z * se,
        level,
        n_clusters: surveys.len(),
    }))
}

/// Approximate inclusion probabilities for successive weighted sampling
/// without replacement: `pi_i = 1 - exp(-t w_i)` with `t` solved so the
/// probabilities sum to the sample size. Exactly `n/I` under equal weights.
pub fn rosen_inclusion_probs(weights: &[f64], n_sample: usize) -> Result<Vec<f64>> {
    let n = n_sample as f64;
    if n_sample == 0 || n_sample > weights.len() {
        return Err(Error::config(format!(
            "sample size {n_sample} incompatible with {} units",
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::data("selection weights must be finite and nonnegative"));
    }
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive < n_sample {
        return Err(Error::data(format!(
            "only {positive} units have positive weight; cannot include {n_sample}"
        )));
    }
    if positive == n_sample {
        // Every positive-weight unit is certain to be drawn eventually.
        return Ok(weights.iter().map(|&w| if w > 0.0 { 1.0 } else { 0.0 }).collect());
    }
    let total: f64 = weights.iter().sum();
    let expected = |t: f64| weights.iter().map(|&w| 1.0 - (-t * w).exp()).sum::<f64>();
    // Bracket the root: expected(t) is increasing from 0 toward `positive`.
    let mut lo = 0.0f64;
    let mut hi = n / total; // linearization lower-bounds t
    while expected(hi) < n {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::data("inclusion probability solve failed to bracket"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Ok(weights.iter().map(|&w| 1.0 - (-t * w).exp()).collect())
}
