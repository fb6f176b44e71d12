//! Synthetic jurisdictions with known cell-level ground truth.
//!
//! Each precinct draws a population size, a racial mix from a Dirichlet (the
//! concentration controls how integrated precincts are), a logit vector from
//! the population Gaussian, and finally multinomial cell counts per race. An
//! optional aggregation-bias knob ties one race's two-party split to the
//! precinct share of a covariate race, so that precinct demographics predict
//! within-precinct behavior — the failure mode that breaks estimators relying
//! on ecological variation alone.
//!
//! The module also provides the survey side of the experiment: precinct
//! selection under several weighting schemes keyed to racial integration, and
//! within-precinct simple random samples drawn from the true cells.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Hypergeometric};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Dimensions, EcologicalTable, SurveyCounts, ABSTAIN};
use crate::error::{Error, Result};
use crate::estimands::{compute_estimands, EstimandSet};
use crate::logit::to_theta;
use crate::mathutil::largest_remainder_round;
use crate::rngstream::{stream, tags};

/// How much precinct racial mixes vary: integrated jurisdictions draw mixes
/// from a concentrated Dirichlet, less integrated ones from a sparse one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integration {
    Integrated,
    LessIntegrated,
}

impl Integration {
    pub fn dirichlet_concentration(self) -> f64 {
        match self {
            Integration::Integrated => 4.0,
            Integration::LessIntegrated => 0.3,
        }
    }
}

/// Strength of the covariate-linked behavior shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasLevel {
    None,
    Moderate,
    Severe,
}

impl BiasLevel {
    /// Anchor points (covariate share, affected race's two-party share for
    /// the first choice of the pair). The shift is linear on the logit scale
    /// through these two anchors.
    pub fn anchors(self) -> Option<((f64, f64), (f64, f64))> {
        match self {
            BiasLevel::None => None,
            BiasLevel::Moderate => Some(((0.2, 0.70), (0.8, 0.55))),
            BiasLevel::Severe => Some(((0.2, 0.90), (0.8, 0.30))),
        }
    }
}

fn default_races() -> Vec<String> {
    vec!["black".into(), "white".into(), "hispanic".into()]
}

fn default_choices() -> Vec<String> {
    vec!["dem".into(), "rep".into(), ABSTAIN.into()]
}

/// Default population mean on the logit scale, from per-race choice
/// probabilities (dem, rep, abstain): black (0.54, 0.06, 0.40), white
/// (0.24, 0.36, 0.40), hispanic (0.28, 0.12, 0.60).
fn default_mu_true() -> Vec<f64> {
    let theta: [[f64; 3]; 3] =
        [[0.54, 0.06, 0.40], [0.24, 0.36, 0.40], [0.28, 0.12, 0.60]];
    let mut mu = Vec::with_capacity(6);
    for row in theta {
        mu.push((row[0] / row[2]).ln());
        mu.push((row[1] / row[2]).ln());
    }
    mu
}

fn default_sigma_true() -> Vec<Vec<f64>> {
    let d = 6;
    let mut m = vec![vec![0.0; d]; d];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0; // sd 1.0 on the logit scale: strong precinct heterogeneity
    }
    m
}

fn default_sizes() -> (i64, i64) {
    (400, 1200)
}

fn default_n_precincts() -> usize {
    150
}

fn default_dirichlet() -> Vec<f64> {
    vec![4.0, 4.0, 4.0]
}

fn default_covariate_race() -> String {
    "hispanic".into()
}

fn default_affected_race() -> String {
    "white".into()
}

fn default_bias_pair() -> (String, String) {
    ("rep".into(), "dem".into())
}

/// Full description of a synthetic jurisdiction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub races: Vec<String>,
    pub choices: Vec<String>,
    pub n_precincts: usize,
    pub size_min: i64,
    pub size_max: i64,
    /// Dirichlet concentration per race for precinct mixes.
    pub dirichlet: Vec<f64>,
    /// Population mean logit vector (race-major over non-Abstain choices).
    pub mu_true: Vec<f64>,
    /// Population covariance on the logit scale, row-major.
    pub sigma_true: Vec<Vec<f64>>,
    pub bias: BiasLevel,
    /// Race whose precinct share drives the bias.
    pub covariate_race: String,
    /// Race whose behavior shifts with the covariate.
    pub affected_race: String,
    /// The two choices whose split shifts; the anchor shares refer to the
    /// first of the pair.
    pub bias_choice_pair: (String, String),
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            races: default_races(),
            choices: default_choices(),
            n_precincts: default_n_precincts(),
            size_min: default_sizes().0,
            size_max: default_sizes().1,
            dirichlet: default_dirichlet(),
            mu_true: default_mu_true(),
            sigma_true: default_sigma_true(),
            bias: BiasLevel::None,
            covariate_race: default_covariate_race(),
            affected_race: default_affected_race(),
            bias_choice_pair: default_bias_pair(),
            seed: 0,
        }
    }
}

impl SimConfig {
    /// Default jurisdiction under a named regime.
    pub fn regime(integration: Integration, bias: BiasLevel) -> Self {
        let c = integration.dirichlet_concentration();
        SimConfig { dirichlet: vec![c; 3], bias, ..SimConfig::default() }
    }

    pub fn dims(&self) -> Result<Dimensions> {
        Dimensions::new(self.races.clone(), self.choices.clone())
    }

    fn validate(&self) -> Result<Dimensions> {
        let dims = self.dims()?;
        if self.n_precincts == 0 {
            return Err(Error::config("n_precincts must be positive"));
        }
        if !(0 < self.size_min && self.size_min <= self.size_max) {
            return Err(Error::config("need 0 < size_min <= size_max"));
        }
        if self.dirichlet.len() != dims.n_races() {
            return Err(Error::config("dirichlet concentration length != number of races"));
        }
        if self.dirichlet.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::config("dirichlet concentrations must be positive"));
        }
        if self.mu_true.len() != dims.omega_dim() {
            return Err(Error::config("mu_true length != omega dimension"));
        }
        let d = dims.omega_dim();
        if self.sigma_true.len() != d || self.sigma_true.iter().any(|r| r.len() != d) {
            return Err(Error::config("sigma_true must be d x d"));
        }
        Ok(dims)
    }

    pub(crate) fn sigma_matrix(&self) -> DMatrix<f64> {
        let d = self.sigma_true.len();
        DMatrix::from_fn(d, d, |i, j| self.sigma_true[i][j])
    }
}

/// Resolved bias mapping: mu coordinates (hi, lo) for the affected race's
/// choice pair, their base sum, and the logit-scale line d(x) = a + b x with
/// split mu_hi = (sum + d)/2, mu_lo = (sum - d)/2.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BiasMap {
    pub coord_hi: usize,
    pub coord_lo: usize,
    pub base_sum: f64,
    pub intercept: f64,
    pub slope: f64,
}

impl BiasMap {
    pub fn mu_pair(&self, x: f64) -> (f64, f64) {
        let d = self.intercept + self.slope * x;
        (0.5 * (self.base_sum + d), 0.5 * (self.base_sum - d))
    }
}

pub(crate) fn resolve_bias(cfg: &SimConfig, dims: &Dimensions) -> Result<Option<BiasMap>> {
    let anchors = match cfg.bias.anchors() {
        None => return Ok(None),
        Some(a) => a,
    };
    let race = dims
        .race_index(&cfg.affected_race)
        .ok_or_else(|| Error::config(format!("unknown affected race {}", cfg.affected_race)))?;
    let hi_choice = dims
        .choice_index(&cfg.bias_choice_pair.0)
        .ok_or_else(|| Error::config(format!("unknown choice {}", cfg.bias_choice_pair.0)))?;
    let lo_choice = dims
        .choice_index(&cfg.bias_choice_pair.1)
        .ok_or_else(|| Error::config(format!("unknown choice {}", cfg.bias_choice_pair.1)))?;
    if hi_choice >= dims.abstain_col() || lo_choice >= dims.abstain_col() || hi_choice == lo_choice
    {
        return Err(Error::config("bias choice pair must be two distinct non-Abstain choices"));
    }
    let logit = |p: f64| (p / (1.0 - p)).ln();
    let ((x1, p1), (x2, p2)) = anchors;
    let slope = (logit(p2) - logit(p1)) / (x2 - x1);
    let intercept = logit(p1) - slope * x1;
    let coord_hi = dims.omega_coord(race, hi_choice);
    let coord_lo = dims.omega_coord(race, lo_choice);
    Ok(Some(BiasMap {
        coord_hi,
        coord_lo,
        base_sum: cfg.mu_true[coord_hi] + cfg.mu_true[coord_lo],
        intercept,
        slope,
    }))
}

/// Everything the generator knows and an estimator should recover.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    /// Per-unit true cells, in dataset order.
    pub unit_cells: Vec<(String, Vec<i64>)>,
    /// Per-unit covariate-race population share, in dataset order.
    pub covariate_share: Vec<f64>,
    pub estimands: EstimandSet,
}

impl TruthRecord {
    pub fn cells_for(&self, unit_id: &str) -> Option<&[i64]> {
        self.unit_cells
            .iter()
            .find(|(id, _)| id == unit_id)
            .map(|(_, c)| c.as_slice())
    }
}

/// Dirichlet draw as normalized Gammas (works for any dimension).
fn dirichlet_sample(alphas: &[Gamma<f64>], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut g: Vec<f64> = alphas.iter().map(|a| a.sample(rng)).collect();
    let sum: f64 = g.iter().sum();
    if sum > 0.0 {
        for v in &mut g {
            *v /= sum;
        }
    } else {
        // All draws underflowed to zero (tiny concentrations): fall back to
        // a point mass on one category, matching the Dirichlet limit.
        let j = rng.random_range(0..g.len());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[j] = 1.0;
    }
    g
}

fn multinomial(n: i64, probs: &[f64], rng: &mut ChaCha8Rng) -> Vec<i64> {
    let c = probs.len();
    let mut out = vec![0i64; c];
    let mut remaining = n;
    let mut rest = 1.0f64;
    for i in 0..c - 1 {
        if remaining == 0 {
            break;
        }
        let p = (probs[i] / rest).clamp(0.0, 1.0);
        let k = if p >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining as u64, p)
                .expect("clamped probability is valid")
                .sample(rng) as i64
        };
        out[i] = k;
        remaining -= k;
        rest -= probs[i];
        if rest <= 0.0 {
            break;
        }
    }
    out[c - 1] += remaining;
    out
}

/// Generate a jurisdiction. Deterministic in `cfg.seed`; precincts are named
/// `p0001`, `p0002`, ...
pub fn gen_jurisdiction(cfg: &SimConfig) -> Result<(Dataset, TruthRecord)> {
    let dims = cfg.validate()?;
    let d = dims.omega_dim();
    let nr = dims.n_races();
    let nc = dims.n_choices();
    let cov_race = dims
        .race_index(&cfg.covariate_race)
        .ok_or_else(|| Error::config(format!("unknown covariate race {}", cfg.covariate_race)))?;
    let bias = resolve_bias(cfg, &dims)?;
    let sigma = cfg.sigma_matrix();
    let chol_l = sigma
        .cholesky()
        .ok_or_else(|| Error::config("sigma_true is not positive definite"))?
        .l();
    let dirichlet: Vec<Gamma<f64>> = cfg
        .dirichlet
        .iter()
        .map(|&a| {
            Gamma::new(a, 1.0)
                .map_err(|e| Error::config(format!("bad dirichlet concentration: {e}")))
        })
        .collect::<Result<_>>()?;

    let mut tables = Vec::with_capacity(cfg.n_precincts);
    let mut unit_cells = Vec::with_capacity(cfg.n_precincts);
    let mut covariate_share = Vec::with_capacity(cfg.n_precincts);
    for i in 0..cfg.n_precincts {
        let mut rng = stream(cfg.seed, &[tags::SIM_UNIT, i as u64]);
        let id = format!("p{:04}", i + 1);
        let total = rng.random_range(cfg.size_min..=cfg.size_max);
        let shares = dirichlet_sample(&dirichlet, &mut rng);
        let scaled: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
        let rows = largest_remainder_round(&scaled, total);
        let x = rows[cov_race] as f64 / total as f64;
        covariate_share.push(x);

        let mut mu_i = DVector::from_column_slice(&cfg.mu_true);
        if let Some(b) = &bias {
            let (hi, lo) = b.mu_pair(x);
            mu_i[b.coord_hi] = hi;
            mu_i[b.coord_lo] = lo;
        }
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let omega = mu_i + &chol_l * z;
        let theta = to_theta(omega.as_slice(), nr, nc)?;

        let mut cells = vec![0i64; nr * nc];
        for r in 0..nr {
            let row = multinomial(rows[r], theta[r].probs(), &mut rng);
            cells[r * nc..(r + 1) * nc].copy_from_slice(&row);
        }
        let col_totals: Vec<i64> =
            (0..nc).map(|c| (0..nr).map(|r| cells[r * nc + c]).sum()).collect();
        tables.push(EcologicalTable { unit_id: id.clone(), row_totals: rows, col_totals });
        unit_cells.push((id, cells));
    }
    let estimands = compute_estimands(unit_cells.iter().map(|(_, c)| c.as_slice()), &dims);
    let truth = TruthRecord { unit_cells, covariate_share, estimands };
    Ok((Dataset::new(dims, tables, Vec::new()), truth))
}

/// Inverse Herfindahl index of a precinct's racial mix: 1 / sum of squared
/// population shares. Equals 1 for a single-race precinct and the number of
/// races for a perfectly even mix; higher means more integrated.
pub fn herfindahl_weight(row_totals: &[i64]) -> Result<f64> {
    let n: i64 = row_totals.iter().sum();
    if n <= 0 {
        return Err(Error::data("zero-population precinct has no mix index"));
    }
    let ssq: f64 = row_totals
        .iter()
        .map(|&r| {
            let s = r as f64 / n as f64;
            s * s
        })
        .sum();
    Ok(1.0 / ssq)
}

/// Precinct selection weighting schemes, all keyed to the inverse Herfindahl
/// index h: schemes 1-3 favor integrated precincts strongly (h^4), mildly
/// (h), and disfavor them strongly (h^-4); `herfindahl` is the plain index
/// weight and `uniform` ignores composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    S1,
    S2,
    S3,
    Herfindahl,
    Uniform,
}

impl Scheme {
    pub const ALL: [Scheme; 5] =
        [Scheme::S1, Scheme::S2, Scheme::S3, Scheme::Herfindahl, Scheme::Uniform];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::S1 => "s1",
            Scheme::S2 => "s2",
            Scheme::S3 => "s3",
            Scheme::Herfindahl => "herfindahl",
            Scheme::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(Scheme::S1),
            "s2" => Ok(Scheme::S2),
            "s3" => Ok(Scheme::S3),
            "herfindahl" => Ok(Scheme::Herfindahl),
            "uniform" => Ok(Scheme::Uniform),
            other => Err(Error::config(format!(
                "unknown scheme {other}; expected s1|s2|s3|herfindahl|uniform"
            ))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Selection weight for every unit in dataset order.
pub fn scheme_weights(d: &Dataset, scheme: Scheme) -> Result<Vec<f64>> {
    d.tables
        .iter()
        .map(|t| {
            let h = herfindahl_weight(&t.row_totals)?;
            Ok(match scheme {
                Scheme::S1 => h.powi(4),
                Scheme::S2 | Scheme::Herfindahl => h,
                Scheme::S3 => h.powi(-4),
                Scheme::Uniform => 1.0,
            })
        })
        .collect()
}

/// Draw `n_sample` distinct precincts by weighted sampling without
/// replacement (successive draws proportional to weight among the units not
/// yet chosen). Returns unit ids in dataset order.
pub fn select_precincts(
    d: &Dataset,
    scheme: Scheme,
    n_sample: usize,
    seed: u64,
) -> Result<Vec<String>> {
    if n_sample == 0 {
        return Err(Error::config("n_sample must be positive"));
    }
    if n_sample > d.tables.len() {
        return Err(Error::config(format!(
            "cannot sample {n_sample} of {} precincts",
            d.tables.len()
        )));
    }
    let weights = scheme_weights(d, scheme)?;
    let mut rng = stream(seed, &[tags::SELECT]);
    let mut pool: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    let mut chosen = Vec::with_capacity(n_sample);
    for _ in 0..n_sample {
        let total: f64 = pool.iter().map(|(_, w)| w).sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = pool.len() - 1;
        for (j, (_, w)) in pool.iter().enumerate() {
            u -= w;
            if u <= 0.0 {
                pick = j;
                break;
            }
        }
        chosen.push(pool.swap_remove(pick).0);
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| d.tables[i].unit_id.clone()).collect())
}

/// Simple random sample of round(fraction * N_i) individuals from each
/// sampled unit's true cells (multivariate hypergeometric), including the
/// Abstain column — the survey observes nonvoters exactly as the model
/// assumes.
pub fn draw_survey(
    truth: &TruthRecord,
    sample_ids: &[String],
    fraction: f64,
    seed: u64,
) -> Result<Vec<SurveyCounts>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config("sampling fraction must be in (0, 1]"));
    }
    let mut out = Vec::with_capacity(sample_ids.len());
    for (si, id) in sample_ids.iter().enumerate() {
        let cells = truth
            .cells_for(id)
            .ok_or_else(|| Error::data(format!("no truth record for unit {id}")))?;
        let total: i64 = cells.iter().sum();
        let draws = ((fraction * total as f64).round() as i64).clamp(0, total);
        let mut rng = stream(seed, &[tags::SURVEY, si as u64]);
        let mut k = vec![0i64; cells.len()];
        let mut rem_total = total;
        let mut rem_draws = draws;
        for (idx, &cell) in cells.iter().enumerate() {
            if rem_draws == 0 {
                break;
            }
            if rem_total == cell {
                // Everything left must be drawn from the remaining cells.
                k[idx] = rem_draws.min(cell);
            } else {
                k[idx] = Hypergeometric::new(rem_total as u64, cell as u64, rem_draws as u64)
                    .expect("valid hypergeometric parameters")
                    .sample(&mut rng) as i64;
            }
            rem_total -= cell;
            rem_draws -= k[idx];
        }
        out.push(SurveyCounts { unit_id: id.clone(), counts: k });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::validate_dataset;

    #[test]
    fn generated_dataset_is_consistent() {
        let cfg = SimConfig { n_precincts: 25, seed: 5, ..SimConfig::default() };
        let (data, truth) = gen_jurisdiction(&cfg).unwrap();
        assert!(validate_dataset(&data).is_ok());
        assert_eq!(data.tables.len(), 25);
        let nc = data.dims.n_choices();
        for (t, (id, cells)) in data.tables.iter().zip(&truth.unit_cells) {
            assert_eq!(&t.unit_id, id);
            for (r, &want) in t.row_totals.iter().enumerate() {
                assert_eq!(cells[r * nc..(r + 1) * nc].iter().sum::<i64>(), want);
            }
            for (c, &want) in t.col_totals.iter().enumerate() {
                assert_eq!((0..3).map(|r| cells[r * nc + c]).sum::<i64>(), want);
            }
            assert!((cfg.size_min..=cfg.size_max).contains(&t.total()));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SimConfig { n_precincts: 8, seed: 99, ..SimConfig::default() };
        let (d1, t1) = gen_jurisdiction(&cfg).unwrap();
        let (d2, t2) = gen_jurisdiction(&cfg).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(t1.unit_cells, t2.unit_cells);
    }

    #[test]
    fn bias_mapping_hits_anchor_shares() {
        let cfg = SimConfig { bias: BiasLevel::Moderate, ..SimConfig::default() };
        let dims = cfg.dims().unwrap();
        let b = resolve_bias(&cfg, &dims).unwrap().unwrap();
        let share = |x: f64| {
            let (hi, lo) = b.mu_pair(x);
            let e = (hi - lo).exp();
            e / (1.0 + e)
        };
        assert!((share(0.2) - 0.70).abs() < 1e-12);
        assert!((share(0.8) - 0.55).abs() < 1e-12);
        // Severe is steeper, same machinery.
        let cfg = SimConfig { bias: BiasLevel::Severe, ..SimConfig::default() };
        let b = resolve_bias(&cfg, &dims).unwrap().unwrap();
        let share = |x: f64| {
            let (hi, lo) = b.mu_pair(x);
            let e: f64 = (hi - lo).exp();
            e / (1.0 + e)
        };
        assert!((share(0.2) - 0.90).abs() < 1e-12);
        assert!((share(0.8) - 0.30).abs() < 1e-12);
        // The pair sum is preserved, so only the split moves.
        let (hi, lo) = b.mu_pair(0.37);
        assert!((hi + lo - b.base_sum).abs() < 1e-12);
    }

    #[test]
    fn bias_shifts_generated_behavior_with_covariate() {
        let cfg = SimConfig {
            n_precincts: 120,
            seed: 31,
            bias: BiasLevel::Severe,
            ..SimConfig::default()
        };
        let (data, truth) = gen_jurisdiction(&cfg).unwrap();
        let dims = &data.dims;
        let nc = dims.n_choices();
        let w = dims.race_index("white").unwrap();
        let dem = dims.choice_index("dem").unwrap();
        let rep = dims.choice_index("rep").unwrap();
        // Mean white republican two-party share among low- vs high-hispanic
        // precincts (median split on the covariate).
        let mut xs: Vec<f64> = truth.covariate_share.clone();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = xs[xs.len() / 2];
        let (mut lo_sum, mut lo_n, mut hi_sum, mut hi_n) = (0.0, 0, 0.0, 0);
        for (i, (_, cells)) in truth.unit_cells.iter().enumerate() {
            let r = cells[w * nc + rep] as f64;
            let d = cells[w * nc + dem] as f64;
            if r + d == 0.0 {
                continue;
            }
            let share = r / (r + d);
            if truth.covariate_share[i] < median {
                lo_sum += share;
                lo_n += 1;
            } else {
                hi_sum += share;
                hi_n += 1;
            }
        }
        let lo_mean = lo_sum / lo_n as f64;
        let hi_mean = hi_sum / hi_n as f64;
        assert!(
            lo_mean > hi_mean + 0.1,
            "expected a strong downward shift: low {lo_mean}, high {hi_mean}"
        );
    }

    #[test]
    fn integration_regimes_order_mix_indices() {
        let mk = |integration| {
            let cfg = SimConfig {
                n_precincts: 60,
                seed: 12,
                ..SimConfig::regime(integration, BiasLevel::None)
            };
            let (data, _) = gen_jurisdiction(&cfg).unwrap();
            let hs: Vec<f64> = data
                .tables
                .iter()
                .map(|t| herfindahl_weight(&t.row_totals).unwrap())
                .collect();
            hs.iter().sum::<f64>() / hs.len() as f64
        };
        let integrated = mk(Integration::Integrated);
        let less = mk(Integration::LessIntegrated);
        assert!(
            integrated > less + 0.3,
            "integrated {integrated} vs less integrated {less}"
        );
    }

    #[test]
    fn herfindahl_worked_values() {
        assert!((herfindahl_weight(&[50, 50]).unwrap() - 2.0).abs() < 1e-12);
        assert!((herfindahl_weight(&[100, 0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((herfindahl_weight(&[60, 20, 20]).unwrap() - 1.0 / 0.44).abs() < 1e-12);
        assert!(herfindahl_weight(&[0, 0]).is_err());
    }

    #[test]
    fn scheme_weights_order_by_integration() {
        let dims = Dimensions::new(default_races(), default_choices()).unwrap();
        let even = EcologicalTable {
            unit_id: "even".into(),
            row_totals: vec![40, 40, 40],
            col_totals: vec![40, 40, 40],
        };
        let lopsided = EcologicalTable {
            unit_id: "lop".into(),
            row_totals: vec![118, 1, 1],
            col_totals: vec![40, 40, 40],
        };
        let d = Dataset::new(dims, vec![even, lopsided], vec![]);
        let w1 = scheme_weights(&d, Scheme::S1).unwrap();
        let w3 = scheme_weights(&d, Scheme::S3).unwrap();
        let wu = scheme_weights(&d, Scheme::Uniform).unwrap();
        assert!(w1[0] > w1[1] * 10.0, "scheme 1 should strongly favor the even precinct");
        assert!(w3[0] < w3[1] / 10.0, "scheme 3 should strongly disfavor it");
        assert_eq!(wu, vec![1.0, 1.0]);
    }

    #[test]
    fn selection_is_exhaustive_and_deterministic() {
        let cfg = SimConfig { n_precincts: 12, seed: 3, ..SimConfig::default() };
        let (data, _) = gen_jurisdiction(&cfg).unwrap();
        let all = select_precincts(&data, Scheme::Uniform, 12, 7).unwrap();
        assert_eq!(all.len(), 12);
        let ids: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(ids.len(), 12);
        let a = select_precincts(&data, Scheme::S1, 4, 7).unwrap();
        let b = select_precincts(&data, Scheme::S1, 4, 7).unwrap();
        assert_eq!(a, b);
        assert!(select_precincts(&data, Scheme::S1, 13, 7).is_err());
    }

    #[test]
    fn survey_nested_in_truth_and_census_exact() {
        let cfg = SimConfig { n_precincts: 10, seed: 21, ..SimConfig::default() };
        let (data, truth) = gen_jurisdiction(&cfg).unwrap();
        let sample = select_precincts(&data, Scheme::S2, 5, 13).unwrap();
        let surveys = draw_survey(&truth, &sample, 1.0 / 16.0, 17).unwrap();
        for s in &surveys {
            let cells = truth.cells_for(&s.unit_id).unwrap();
            let total: i64 = cells.iter().sum();
            let want = (total as f64 / 16.0).round() as i64;
            assert_eq!(s.total(), want);
            for (k, n) in s.counts.iter().zip(cells) {
                assert!(k <= n);
            }
        }
        // Census: fraction 1 reproduces the cells exactly.
        let census = draw_survey(&truth, &sample, 1.0, 23).unwrap();
        for s in &census {
            assert_eq!(s.counts.as_slice(), truth.cells_for(&s.unit_id).unwrap());
        }
        // Valid as a dataset.
        let with_survey = Dataset::new(data.dims.clone(), data.tables.clone(), surveys);
        assert!(validate_dataset(&with_survey).is_ok());
    }
}
