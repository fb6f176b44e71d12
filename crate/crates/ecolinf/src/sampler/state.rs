//! Chain state and its deterministic initialization.

use nalgebra::{DMatrix, DVector};

use crate::data::{validate_dataset, Dataset, Dimensions};
use crate::error::{Error, Result};
use crate::logit::{to_omega, ThetaRow};
use crate::sampler::{ChainConfig, HyperPrior};

/// Mutable per-unit coordinates: the latent cell table (row-major, full
/// counts including any surveyed individuals), the unit's logit vector, and
/// its random-walk proposal scale.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitState {
    pub cells: Vec<i64>,
    pub omega: DVector<f64>,
    pub scale: f64,
}

/// Everything the sampler mutates.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub units: Vec<UnitState>,
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
}

/// Immutable per-unit inputs the kernels condition on.
#[derive(Debug, Clone)]
pub(crate) struct UnitData {
    pub id: String,
    pub rows: Vec<i64>,
    pub cols: Vec<i64>,
    /// Surveyed counts (cell-wise lower bounds), if the unit is in-sample.
    pub k: Option<Vec<i64>>,
    /// Rows with positive totals; swap proposals only touch these.
    pub active_rows: Vec<u32>,
}

impl UnitData {
    pub fn total(&self) -> i64 {
        self.rows.iter().sum()
    }
}

/// Validate the dataset and split it into sampler units, dropping
/// zero-population units (they carry no information). Returns the retained
/// units and the ids of dropped ones.
pub(crate) fn prepare_units(d: &Dataset) -> Result<(Vec<UnitData>, Vec<String>)> {
    validate_dataset(d).into_result()?;
    let mut units = Vec::with_capacity(d.tables.len());
    let mut dropped = Vec::new();
    for t in &d.tables {
        if t.row_totals.iter().all(|&x| x == 0) {
            dropped.push(t.unit_id.clone());
            continue;
        }
        let k = d.survey_for(&t.unit_id).map(|s| s.counts.clone());
        let active_rows = t
            .row_totals
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(r, _)| r as u32)
            .collect();
        units.push(UnitData {
            id: t.unit_id.clone(),
            rows: t.row_totals.clone(),
            cols: t.col_totals.clone(),
            k,
            active_rows,
        });
    }
    if units.is_empty() {
        return Err(Error::data("no units with positive population"));
    }
    Ok((units, dropped))
}

/// Integer table with the given margins, built from the independence fit:
/// floor(rows[r]*cols[c]/N), then hand the row/column shortfalls out by
/// largest fractional part, then a northwest-corner pass to finish exactly.
/// Deterministic; margins are restored exactly.
fn independence_table(rows: &[i64], cols: &[i64]) -> Vec<i64> {
    let nr = rows.len();
    let nc = cols.len();
    let total: i64 = rows.iter().sum();
    let mut cells = vec![0i64; nr * nc];
    if total == 0 {
        return cells;
    }
    let mut frac = vec![0.0f64; nr * nc];
    for r in 0..nr {
        for c in 0..nc {
            let x = rows[r] as f64 * cols[c] as f64 / total as f64;
            cells[r * nc + c] = x.floor() as i64;
            frac[r * nc + c] = x - x.floor();
        }
    }
    let mut row_short: Vec<i64> =
        (0..nr).map(|r| rows[r] - cells[r * nc..(r + 1) * nc].iter().sum::<i64>()).collect();
    let mut col_short: Vec<i64> =
        (0..nc).map(|c| cols[c] - (0..nr).map(|r| cells[r * nc + c]).sum::<i64>()).collect();

    // Greedy pass: largest fractional parts first, where both margins still
    // have room.
    let mut order: Vec<usize> = (0..nr * nc).collect();
    order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).unwrap().then(a.cmp(&b)));
    for idx in order {
        let (r, c) = (idx / nc, idx % nc);
        if row_short[r] > 0 && col_short[c] > 0 {
            cells[idx] += 1;
            row_short[r] -= 1;
            col_short[c] -= 1;
        }
    }
    // Northwest-corner cleanup for whatever the greedy pass could not place.
    for r in 0..nr {
        for c in 0..nc {
            let add = row_short[r].min(col_short[c]);
            if add > 0 {
                cells[r * nc + c] += add;
                row_short[r] -= add;
                col_short[c] -= add;
            }
        }
    }
    debug_assert!(row_short.iter().all(|&x| x == 0) && col_short.iter().all(|&x| x == 0));
    cells
}

pub(crate) fn init_unit(u: &UnitData, dims: &Dimensions, rw_scale: f64) -> Result<UnitState> {
    let nc = dims.n_choices();
    let cells = match &u.k {
        None => independence_table(&u.rows, &u.cols),
        Some(k) => {
            // Fit the unsurveyed remainder M to the reduced margins, then add
            // the survey back.
            let mut rows_m = u.rows.clone();
            let mut cols_m = u.cols.clone();
            for r in 0..dims.n_races() {
                for c in 0..nc {
                    let kk = k[r * nc + c];
                    rows_m[r] -= kk;
                    cols_m[c] -= kk;
                }
            }
            if rows_m.iter().any(|&x| x < 0) || cols_m.iter().any(|&x| x < 0) {
                return Err(Error::data(format!(
                    "unit {}: survey counts exceed the unit margins",
                    u.id
                )));
            }
            let m = independence_table(&rows_m, &cols_m);
            m.iter().zip(k).map(|(a, b)| a + b).collect()
        }
    };
    // Smoothed empirical frequencies seed the logit vector.
    let mut theta_rows = Vec::with_capacity(dims.n_races());
    for r in 0..dims.n_races() {
        let row = &cells[r * nc..(r + 1) * nc];
        let denom: f64 = row.iter().map(|&x| x as f64 + 0.5).sum();
        theta_rows.push(ThetaRow::new(row.iter().map(|&x| (x as f64 + 0.5) / denom).collect())?);
    }
    let omega = DVector::from_vec(to_omega(&theta_rows)?);
    Ok(UnitState { cells, omega, scale: rw_scale })
}

pub(crate) fn init_from_units(
    units: &[UnitData],
    dims: &Dimensions,
    hyper: &HyperPrior,
    cfg: &ChainConfig,
) -> Result<ChainState> {
    let d = dims.omega_dim();
    hyper.validate(d)?;
    cfg.validate()?;
    let rw_scale = cfg.rw_scale.unwrap_or(2.38 / (d as f64).sqrt());
    let mut unit_states = Vec::with_capacity(units.len());
    for u in units {
        unit_states.push(init_unit(u, dims, rw_scale)?);
    }
    let sigma = if hyper.nu0 > (d + 1) as f64 {
        &hyper.psi0 / (hyper.nu0 - d as f64 - 1.0)
    } else {
        hyper.psi0.clone()
    };
    Ok(ChainState { units: unit_states, mu: hyper.mu0.clone(), sigma })
}

/// Deterministic starting state: cell tables from the rounded independence
/// fit (survey counts respected exactly), logit vectors from smoothed
/// within-unit frequencies, mu at its prior mean, Sigma at its prior mean.
pub fn init_state(d: &Dataset, hyper: &HyperPrior, cfg: &ChainConfig) -> Result<ChainState> {
    let (units, _dropped) = prepare_units(d)?;
    init_from_units(&units, &d.dims, hyper, cfg)
}
