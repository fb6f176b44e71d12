//! Replicated estimator-comparison experiments on synthetic jurisdictions.
//!
//! Each replicate generates a jurisdiction with known truth, selects a
//! precinct sample under a weighting scheme, draws within-precinct surveys,
//! and hands the data to each competing estimator: the count model on margins
//! alone, the design-based survey ratio, or the count model with the survey
//! folded in. Metrics aggregate the replicates: RMSE, interval coverage and
//! length, and pairwise sign tests on absolute error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimands::summarize;
use crate::mathutil::ln_factorial;
use crate::rngstream::{derive_key, tags};
use crate::sampler::{run_chains, ChainConfig, DrawStore, HyperPrior};
use crate::simgen::{draw_survey, gen_jurisdiction, select_precincts, Scheme, SimConfig};
use crate::survey::{
    rosen_inclusion_probs, survey_estimate, SurveyDesign, TargetEstimand,
};

/// A competing estimator. Survey-backed variants carry the precinct
/// selection scheme; within one replicate the survey and hybrid variants of
/// the same scheme see the identical sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum EstimatorId {
    /// Count model fit to precinct margins only.
    Ei,
    /// Design-based ratio from the survey alone.
    Survey(Scheme),
    /// Count model fit to margins plus the survey.
    Hybrid(Scheme),
}

impl EstimatorId {
    pub fn label(self) -> String {
        match self {
            EstimatorId::Ei => "ei".into(),
            EstimatorId::Survey(s) => format!("survey_{}", s.label()),
            EstimatorId::Hybrid(s) => format!("hybrid_{}", s.label()),
        }
    }

    pub fn scheme(self) -> Option<Scheme> {
        match self {
            EstimatorId::Ei => None,
            EstimatorId::Survey(s) | EstimatorId::Hybrid(s) => Some(s),
        }
    }
}

impl std::str::FromStr for EstimatorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "ei" {
            return Ok(EstimatorId::Ei);
        }
        if let Some(rest) = s.strip_prefix("survey_") {
            return Ok(EstimatorId::Survey(rest.parse()?));
        }
        if let Some(rest) = s.strip_prefix("hybrid_") {
            return Ok(EstimatorId::Hybrid(rest.parse()?));
        }
        Err(Error::config(format!(
            "unknown estimator {s}; expected ei, survey_<scheme>, or hybrid_<scheme>"
        )))
    }
}

impl std::fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

impl TryFrom<String> for EstimatorId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<EstimatorId> for String {
    fn from(e: EstimatorId) -> String {
        e.label()
    }
}

fn default_estimators() -> Vec<EstimatorId> {
    let mut v = vec![EstimatorId::Ei];
    for s in Scheme::ALL {
        v.push(EstimatorId::Survey(s));
        v.push(EstimatorId::Hybrid(s));
    }
    v
}

fn default_target() -> String {
    "lambda_hispanic_dem".into()
}

fn default_fraction() -> f64 {
    1.0 / 16.0
}

fn default_level() -> f64 {
    0.95
}

fn default_replicates() -> usize {
    50
}

fn one() -> u32 {
    1
}

/// Full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub replicates: usize,
    pub seed: u64,
    pub sim: SimConfig,
    pub estimators: Vec<EstimatorId>,
    /// Estimand label the comparison scores, e.g. `lambda_hispanic_dem`.
    pub target: String,
    /// Precincts per survey; defaults to a quarter of the jurisdiction.
    pub n_sample: Option<usize>,
    /// Within-precinct sampling fraction.
    pub sampling_fraction: f64,
    pub level: f64,
    pub mcmc: ChainConfig,
    pub n_chains: u32,
    /// Run replicates through a parallel scheduler; results are identical
    /// either way.
    pub parallel_replicates: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            replicates: default_replicates(),
            seed: 0,
            sim: SimConfig::default(),
            estimators: default_estimators(),
            target: default_target(),
            n_sample: None,
            sampling_fraction: default_fraction(),
            level: default_level(),
            mcmc: ChainConfig::desk_scale(),
            n_chains: one(),
            parallel_replicates: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::config("replicates must be positive"));
        }
        if self.estimators.is_empty() {
            return Err(Error::config("at least one estimator required"));
        }
        let mut seen = std::collections::HashSet::new();
        for e in &self.estimators {
            if !seen.insert(*e) {
                return Err(Error::config(format!("estimator {e} listed twice")));
            }
        }
        if !(self.sampling_fraction > 0.0 && self.sampling_fraction <= 1.0) {
            return Err(Error::config("sampling_fraction must be in (0, 1]"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::config("level must be in (0, 1)"));
        }
        if self.n_chains == 0 {
            return Err(Error::config("n_chains must be positive"));
        }
        let dims = self.sim.dims()?;
        TargetEstimand::parse(&self.target, &dims)?;
        self.mcmc.validate()?;
        if let Some(n) = self.n_sample {
            if n == 0 || n > self.sim.n_precincts {
                return Err(Error::config(format!(
                    "n_sample {n} incompatible with {} precincts",
                    self.sim.n_precincts
                )));
            }
        }
        Ok(())
    }

    pub fn resolved_n_sample(&self) -> usize {
        self.n_sample.unwrap_or(self.sim.n_precincts.div_ceil(4))
    }
}

/// One estimator's answer on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReplicateResult {
    /// Point estimate with its interval.
    Estimate { point: f64, lo: f64, hi: f64 },
    /// The estimator ran but the target was not observable.
    Missing,
    /// The estimator failed outright.
    Failed(String),
}

/// All estimators' answers on one replicate, in `estimators` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub truth: f64,
    pub results: Vec<ReplicateResult>,
}

/// Aggregate scores for one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub estimator: String,
    /// Replicates with a usable estimate.
    pub n_used: usize,
    /// Replicates where the target was unobservable for this estimator.
    pub n_missing: usize,
    /// Replicates where the estimator errored.
    pub n_failed: usize,
    pub rmse: f64,
    pub coverage: f64,
    pub mean_interval_length: f64,
    /// Share of pairwise-complete replicates this estimator beats each other
    /// estimator on absolute error (ties split evenly); NaN on the diagonal.
    pub wins_vs: Vec<f64>,
    /// Two-sided exact sign-test p-value for each comparison; NaN on the
    /// diagonal.
    pub p_vs: Vec<f64>,
}

/// The experiment scoreboard: one row per estimator, pairwise columns in row
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub target: String,
    pub level: f64,
    pub replicates: usize,
    pub estimators: Vec<String>,
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn row(&self, label: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.estimator == label)
    }

    /// Bit-level equality, treating NaN as equal to itself.
    pub fn bit_identical(&self, other: &MetricsTable) -> bool {
        fn veq(a: &[f64], b: &[f64]) -> bool {
            a.len() == b.len()
                && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        self.target == other.target
            && self.level.to_bits() == other.level.to_bits()
            && self.replicates == other.replicates
            && self.estimators == other.estimators
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.estimator == b.estimator
                    && a.n_used == b.n_used
                    && a.n_missing == b.n_missing
                    && a.n_failed == b.n_failed
                    && a.rmse.to_bits() == b.rmse.to_bits()
                    && a.coverage.to_bits() == b.coverage.to_bits()
                    && a.mean_interval_length.to_bits() == b.mean_interval_length.to_bits()
                    && veq(&a.wins_vs, &b.wins_vs)
                    && veq(&a.p_vs, &b.p_vs)
            })
    }
}

/// Everything an experiment run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub metrics: MetricsTable,
    pub outcomes: Vec<ReplicateOutcome>,
}

/// Two-sided exact sign test: probability, under a fair coin, of a win count
/// at least as far from n/2 as the observed one.
pub fn sign_test_pvalue(wins: u64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let observed = (2 * wins).abs_diff(n);
    let ln2n = n as f64 * std::f64::consts::LN_2;
    let mut p = 0.0;
    for j in 0..=n {
        if (2 * j).abs_diff(n) >= observed {
            let lnc =
                ln_factorial(n as i64) - ln_factorial(j as i64) - ln_factorial((n - j) as i64);
            p += (lnc - ln2n).exp();
        }
    }
    p.min(1.0)
}

/// Concatenate draw stores (for example, chains fit to different survey
/// imputations), renumbering chains so ids stay distinct.
pub fn pool_draws(stores: &[DrawStore]) -> Result<DrawStore> {
    let first = stores
        .first()
        .ok_or_else(|| Error::config("no draw stores to pool"))?;
    let mut out = DrawStore::new(first.columns.clone());
    let mut offset: u32 = 0;
    for s in stores {
        if s.columns != first.columns {
            return Err(Error::data("draw stores disagree on columns; cannot pool"));
        }
        for row in &s.rows {
            let mut row = row.clone();
            row.chain += offset;
            out.rows.push(row);
        }
        out.sources.extend(s.sources.iter().cloned());
        offset += s.sources.len().max(1) as u32;
    }
    Ok(out)
}

/// Fit the count model and summarize one target column from its draws.
fn model_result(
    data: &Dataset,
    target_label: &str,
    cfg: &ExperimentConfig,
    chain_cfg: &ChainConfig,
) -> ReplicateResult {
    let hyper = HyperPrior::default_for(&data.dims);
    match run_chains(data, &hyper, chain_cfg, cfg.n_chains) {
        Err(e) => ReplicateResult::Failed(e.to_string()),
        Ok((draws, _reports)) => match draws.column_values(target_label) {
            Err(e) => ReplicateResult::Failed(e.to_string()),
            Ok(values) => match summarize(&values, cfg.level) {
                Ok(s) => ReplicateResult::Estimate { point: s.point, lo: s.lo, hi: s.hi },
                // All draws undefined: the target is unobservable here.
                Err(_) => ReplicateResult::Missing,
            },
        },
    }
}

fn run_replicate(cfg: &ExperimentConfig, rep: usize) -> Result<ReplicateOutcome> {
    let r = rep as u64;
    let sim_cfg =
        SimConfig { seed: derive_key(cfg.seed, &[tags::REPLICATE, r, 1]), ..cfg.sim.clone() };
    let (data, truth) = gen_jurisdiction(&sim_cfg)?;
    let dims = &data.dims;
    let target = TargetEstimand::parse(&cfg.target, dims)?;
    let truth_value = target.value_in(&truth.estimands, dims);
    let n_sample = cfg.resolved_n_sample();

    // One sample and survey per scheme, shared by the survey and hybrid
    // estimators so they see identical data.
    let mut samples: BTreeMap<&'static str, (Scheme, Vec<String>, Vec<crate::data::SurveyCounts>)> =
        BTreeMap::new();
    for e in &cfg.estimators {
        if let Some(scheme) = e.scheme() {
            if samples.contains_key(scheme.label()) {
                continue;
            }
            let tag = scheme as u64;
            let sel_seed = derive_key(cfg.seed, &[tags::REPLICATE, r, 2, tag]);
            let ids = select_precincts(&data, scheme, n_sample, sel_seed)?;
            let svy_seed = derive_key(cfg.seed, &[tags::REPLICATE, r, 3, tag]);
            let surveys = draw_survey(&truth, &ids, cfg.sampling_fraction, svy_seed)?;
            samples.insert(scheme.label(), (scheme, ids, surveys));
        }
    }

    let mut results = Vec::with_capacity(cfg.estimators.len());
    for (ei, e) in cfg.estimators.iter().enumerate() {
        let chain_cfg = ChainConfig {
            seed: derive_key(cfg.seed, &[tags::REPLICATE, r, 4, ei as u64]),
            ..cfg.mcmc.clone()
        };
        let res = match e {
            EstimatorId::Ei => {
                let bare = Dataset::new(dims.clone(), data.tables.clone(), Vec::new());
                model_result(&bare, &cfg.target, cfg, &chain_cfg)
            }
            EstimatorId::Hybrid(scheme) => {
                let (_, _, surveys) = &samples[scheme.label()];
                let with_survey =
                    Dataset::new(dims.clone(), data.tables.clone(), surveys.clone());
                model_result(&with_survey, &cfg.target, cfg, &chain_cfg)
            }
            EstimatorId::Survey(scheme) => {
                let (scheme, ids, surveys) = &samples[scheme.label()];
                let weights = crate::simgen::scheme_weights(&data, *scheme)?;
                let probs = rosen_inclusion_probs(&weights, n_sample)?;
                let sampled_probs: Vec<f64> = data
                    .tables
                    .iter()
                    .zip(&probs)
                    .filter(|(t, _)| ids.contains(&t.unit_id))
                    .map(|(_, &p)| p)
                    .collect();
                let design = SurveyDesign::from_inclusion_probs(
                    ids,
                    &sampled_probs,
                    cfg.sampling_fraction,
                )?;
                match survey_estimate(surveys, &design, target, dims, cfg.level) {
                    Ok(Some(est)) => {
                        ReplicateResult::Estimate { point: est.point, lo: est.lo, hi: est.hi }
                    }
                    Ok(None) => ReplicateResult::Missing,
                    Err(e) => ReplicateResult::Failed(e.to_string()),
                }
            }
        };
        results.push(res);
    }
    Ok(ReplicateOutcome { replicate: rep, truth: truth_value, results })
}

/// Run the experiment and score it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let outcomes: Vec<ReplicateOutcome> = if cfg.parallel_replicates {
        (0..cfg.replicates)
            .into_par_iter()
            .map(|rep| run_replicate(cfg, rep))
            .collect::<Result<_>>()?
    } else {
        (0..cfg.replicates)
            .map(|rep| run_replicate(cfg, rep))
            .collect::<Result<_>>()?
    };
    let metrics = score_outcomes(cfg, &outcomes);
    Ok(ExperimentOutput { metrics, outcomes })
}

/// Aggregate replicate outcomes into the scoreboard.
pub fn score_outcomes(cfg: &ExperimentConfig, outcomes: &[ReplicateOutcome]) -> MetricsTable {
    let labels: Vec<String> = cfg.estimators.iter().map(|e| e.label()).collect();
    let k = labels.len();
    let mut rows = Vec::with_capacity(k);
    for (i, label) in labels.iter().enumerate() {
        let mut n_used = 0;
        let mut n_missing = 0;
        let mut n_failed = 0;
        let mut sq_sum = 0.0;
        let mut covered = 0usize;
        let mut len_sum = 0.0;
        for o in outcomes {
            if o.truth.is_nan() {
                n_failed += 1;
                continue;
            }
            match &o.results[i] {
                ReplicateResult::Estimate { point, lo, hi } => {
                    n_used += 1;
                    sq_sum += (point - o.truth) * (point - o.truth);
                    if *lo <= o.truth && o.truth <= *hi {
                        covered += 1;
                    }
                    len_sum += hi - lo;
                }
                ReplicateResult::Missing => n_missing += 1,
                ReplicateResult::Failed(_) => n_failed += 1,
            }
        }
        let nf = n_used as f64;
        let (rmse, coverage, mean_len) = if n_used > 0 {
            ((sq_sum / nf).sqrt(), covered as f64 / nf, len_sum / nf)
        } else {
            (f64::NAN, f64::NAN, f64::NAN)
        };

        let mut wins_vs = vec![f64::NAN; k];
        let mut p_vs = vec![f64::NAN; k];
        for j in 0..k {
            if j == i {
                continue;
            }
            let mut wins = 0.0f64;
            let mut n_pair = 0u64;
            for o in outcomes {
                if o.truth.is_nan() {
                    continue;
                }
                let (a, b) = (&o.results[i], &o.results[j]);
                if let (
                    ReplicateResult::Estimate { point: pa, .. },
                    ReplicateResult::Estimate { point: pb, .. },
                ) = (a, b)
                {
                    let ea = (pa - o.truth).abs();
                    let eb = (pb - o.truth).abs();
                    n_pair += 1;
                    if ea < eb {
                        wins += 1.0;
                    } else if ea == eb {
                        wins += 0.5;
                    }
                }
            }
            if n_pair > 0 {
                wins_vs[j] = wins / n_pair as f64;
                p_vs[j] = sign_test_pvalue(wins.round() as u64, n_pair);
            }
        }
        rows.push(MetricsRow {
            estimator: label.clone(),
            n_used,
            n_missing,
            n_failed,
            rmse,
            coverage,
            mean_interval_length: mean_len,
            wins_vs,
            p_vs,
        });
    }
    MetricsTable {
        target: cfg.target.clone(),
        level: cfg.level,
        replicates: cfg.replicates,
        estimators: labels,
        rows,
    }
}
