//! The chain driver: owns the state, sweeps the three blocks in order, and
//! records draws.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::{Dataset, Dimensions};
use crate::error::{Error, Result};
use crate::estimands::compute_estimands;
use crate::logit::row_log_probs;
use crate::mathutil::{cholesky_with_jitter, LnFactTable};
use crate::rngstream::{stream, tags};
use crate::sampler::counts::counts_moves;
use crate::sampler::hyper::{draw_mu_given_sigma, draw_sigma_given_mu};
use crate::sampler::omega::{adapt_scale, omega_step};
use crate::sampler::state::{init_from_units, prepare_units, UnitData};
use crate::sampler::{draw_columns, ChainConfig, ChainState, DrawRow, DrawStore, HyperPrior};

/// Diagnostics from one chain run.
#[derive(Debug, Clone)]
pub struct ChainReport {
    pub chain_id: u32,
    pub dropped_units: Vec<String>,
    pub counts_proposed: u64,
    pub counts_accepted: u64,
    pub omega_proposed: u64,
    pub omega_accepted: u64,
    /// Times the scatter matrix needed diagonal jitter to factor.
    pub sigma_jitter_events: u64,
    pub mean_final_scale: f64,
}

impl ChainReport {
    pub fn counts_accept_rate(&self) -> f64 {
        if self.counts_proposed == 0 {
            f64::NAN
        } else {
            self.counts_accepted as f64 / self.counts_proposed as f64
        }
    }

    pub fn omega_accept_rate(&self) -> f64 {
        if self.omega_proposed == 0 {
            f64::NAN
        } else {
            self.omega_accepted as f64 / self.omega_proposed as f64
        }
    }
}

/// Draws plus diagnostics from one chain.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub draws: DrawStore,
    pub report: ChainReport,
}

/// A single MCMC chain over one dataset.
pub struct Chain {
    dims: Dimensions,
    units: Vec<UnitData>,
    cfg: ChainConfig,
    hyper: HyperPrior,
    chain_id: u32,
    sweep_idx: u64,
    state: ChainState,
    // Caches refreshed whenever sigma changes.
    sigma_inv: DMatrix<f64>,
    prop_l: DMatrix<f64>,
    // Fixed prior pieces.
    kappa0_inv: DMatrix<f64>,
    kappa0_inv_mu0: DVector<f64>,
    lnfact: LnFactTable,
    moves_per_sweep: usize,
    dropped: Vec<String>,
    counts_proposed: u64,
    counts_accepted: u64,
    omega_proposed: u64,
    omega_accepted: u64,
    sigma_jitter_events: u64,
}

impl Chain {
    pub fn new(d: &Dataset, hyper: &HyperPrior, cfg: &ChainConfig, chain_id: u32) -> Result<Self> {
        let (units, dropped) = prepare_units(d)?;
        let state = init_from_units(&units, &d.dims, hyper, cfg)?;
        let (kchol, _) = cholesky_with_jitter(&hyper.kappa0)?;
        let kappa0_inv = kchol.inverse();
        let kappa0_inv_mu0 = &kappa0_inv * &hyper.mu0;
        let max_total = units.iter().map(|u| u.total()).max().unwrap_or(0) as usize;
        let moves_per_sweep = cfg.counts_moves_per_sweep.unwrap_or(d.dims.n_cells());
        let mut chain = Chain {
            dims: d.dims.clone(),
            units,
            cfg: cfg.clone(),
            hyper: hyper.clone(),
            chain_id,
            sweep_idx: 0,
            state,
            sigma_inv: DMatrix::zeros(0, 0),
            prop_l: DMatrix::zeros(0, 0),
            kappa0_inv,
            kappa0_inv_mu0,
            lnfact: LnFactTable::up_to(max_total),
            moves_per_sweep,
            dropped,
            counts_proposed: 0,
            counts_accepted: 0,
            omega_proposed: 0,
            omega_accepted: 0,
            sigma_jitter_events: 0,
        };
        chain.refresh_sigma_caches()?;
        Ok(chain)
    }

    fn refresh_sigma_caches(&mut self) -> Result<()> {
        let (chol, jittered) = cholesky_with_jitter(&self.state.sigma)?;
        if jittered {
            self.sigma_jitter_events += 1;
        }
        self.sigma_inv = chol.inverse();
        self.prop_l = chol.l();
        Ok(())
    }

    pub fn dims(&self) -> &Dimensions {
        &self.dims
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn sweep_index(&self) -> u64 {
        self.sweep_idx
    }

    pub fn unit_ids(&self) -> Vec<&str> {
        self.units.iter().map(|u| u.id.as_str()).collect()
    }

    pub fn dropped_units(&self) -> &[String] {
        &self.dropped
    }

    /// Overwrite one unit's logit vector (test hook for studying a single
    /// block with the others frozen).
    pub fn set_unit_omega(&mut self, unit: usize, omega: &[f64]) -> Result<()> {
        if omega.len() != self.dims.omega_dim() {
            return Err(Error::config("omega has the wrong dimension"));
        }
        self.state.units[unit].omega = DVector::from_column_slice(omega);
        Ok(())
    }

    /// Overwrite the population parameters (test hook); refreshes caches.
    pub fn set_population(&mut self, mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<()> {
        let d = self.dims.omega_dim();
        if mu.len() != d || sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::config("population parameters have the wrong dimension"));
        }
        self.state.mu = mu;
        self.state.sigma = sigma;
        self.refresh_sigma_caches()
    }

    /// One full sweep: counts, then omega, then hyperparameters (each block
    /// subject to its config switch). The sweep index advances first, so all
    /// streams for sweep t are keyed by t >= 1.
    pub fn sweep(&mut self) {
        self.sweep_idx += 1;
        if self.cfg.sample_counts {
            self.step_counts();
        }
        if self.cfg.sample_omega {
            self.step_omega();
        }
        if self.cfg.sample_hyper {
            self.step_hyper();
        }
    }

    fn step_counts(&mut self) {
        let sweep = self.sweep_idx;
        let seed = self.cfg.seed;
        let chain = self.chain_id as u64;
        let nr = self.dims.n_races();
        let nc = self.dims.n_choices();
        let k = nc - 1;
        let delta_max = self.cfg.delta_max;
        let moves = self.moves_per_sweep;
        let units = &self.units;
        let lnfact = &self.lnfact;
        let work = |i: usize, cells: &mut Vec<i64>, omega: &DVector<f64>| -> (u64, u64) {
            let u = &units[i];
            let mut log_theta = vec![0.0; nr * nc];
            for r in 0..nr {
                row_log_probs(
                    &omega.as_slice()[r * k..(r + 1) * k],
                    &mut log_theta[r * nc..(r + 1) * nc],
                );
            }
            let mut rng = stream(seed, &[chain, sweep, tags::COUNTS, i as u64]);
            counts_moves(
                cells,
                u.k.as_deref(),
                &log_theta,
                &u.active_rows,
                nc,
                delta_max,
                moves,
                lnfact,
                &mut rng,
            )
        };
        let tallies: Vec<(u64, u64)> = if self.cfg.parallel_units {
            self.state
                .units
                .par_iter_mut()
                .enumerate()
                .map(|(i, us)| work(i, &mut us.cells, &us.omega))
                .collect()
        } else {
            self.state
                .units
                .iter_mut()
                .enumerate()
                .map(|(i, us)| work(i, &mut us.cells, &us.omega))
                .collect()
        };
        for (p, a) in tallies {
            self.counts_proposed += p;
            self.counts_accepted += a;
        }
    }

    fn step_omega(&mut self) {
        let sweep = self.sweep_idx;
        let seed = self.cfg.seed;
        let chain = self.chain_id as u64;
        let nr = self.dims.n_races();
        let nc = self.dims.n_choices();
        let adapting = self.cfg.adapt && sweep <= self.cfg.n_burnin;
        let mu = &self.state.mu;
        let sigma_inv = &self.sigma_inv;
        let prop_l = &self.prop_l;
        let work = |i: usize,
                    cells: &[i64],
                    omega: &mut DVector<f64>,
                    scale: &mut f64|
         -> bool {
            let mut rng = stream(seed, &[chain, sweep, tags::OMEGA, i as u64]);
            let (alpha, accepted) =
                omega_step(omega, cells, nr, nc, mu, sigma_inv, prop_l, *scale, &mut rng);
            if adapting {
                adapt_scale(scale, alpha, sweep);
            }
            accepted
        };
        let accepts: Vec<bool> = if self.cfg.parallel_units {
            self.state
                .units
                .par_iter_mut()
                .enumerate()
                .map(|(i, us)| work(i, &us.cells, &mut us.omega, &mut us.scale))
                .collect()
        } else {
            self.state
                .units
                .iter_mut()
                .enumerate()
                .map(|(i, us)| work(i, &us.cells, &mut us.omega, &mut us.scale))
                .collect()
        };
        self.omega_proposed += accepts.len() as u64;
        self.omega_accepted += accepts.iter().filter(|&&a| a).count() as u64;
    }

    fn step_hyper(&mut self) {
        let mut rng = stream(
            self.cfg.seed,
            &[self.chain_id as u64, self.sweep_idx, tags::HYPER],
        );
        // Serial reduction in unit order, for scheduling-independent results.
        let mut sum_omega = DVector::zeros(self.dims.omega_dim());
        for us in &self.state.units {
            sum_omega += &us.omega;
        }
        let mu = draw_mu_given_sigma(
            &self.kappa0_inv,
            &self.kappa0_inv_mu0,
            &self.sigma_inv,
            &sum_omega,
            self.state.units.len(),
            &mut rng,
        )
        .expect("mu update failed on a positive-definite precision");
        self.state.mu = mu;
        let (sigma, jittered) = draw_sigma_given_mu(
            self.state.units.iter().map(|u| &u.omega),
            &self.state.mu,
            &self.hyper,
            &mut rng,
        )
        .expect("sigma update failed on a positive-definite scale");
        if jittered {
            self.sigma_jitter_events += 1;
        }
        self.state.sigma = sigma;
        self.refresh_sigma_caches()
            .expect("covariance draw should be positive definite");
    }

    /// Structural soundness of the current state: margins intact, survey
    /// floors respected, no negative cells, finite coordinates.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let nc = self.dims.n_choices();
        for (u, us) in self.units.iter().zip(&self.state.units) {
            for (r, &want) in u.rows.iter().enumerate() {
                let got: i64 = us.cells[r * nc..(r + 1) * nc].iter().sum();
                if got != want {
                    return Err(format!("unit {}: row {r} sums to {got}, expected {want}", u.id));
                }
            }
            for (c, &want) in u.cols.iter().enumerate() {
                let got: i64 = (0..u.rows.len()).map(|r| us.cells[r * nc + c]).sum();
                if got != want {
                    return Err(format!("unit {}: col {c} sums to {got}, expected {want}", u.id));
                }
            }
            if let Some(bad) = us.cells.iter().position(|&x| x < 0) {
                return Err(format!("unit {}: negative cell at {bad}", u.id));
            }
            if let Some(k) = &u.k {
                if let Some(bad) = us.cells.iter().zip(k).position(|(n, f)| n < f) {
                    return Err(format!(
                        "unit {}: cell {bad} fell below its surveyed floor",
                        u.id
                    ));
                }
            }
            if us.omega.iter().any(|x| !x.is_finite()) {
                return Err(format!("unit {}: non-finite omega", u.id));
            }
            if !(us.scale > 0.0 && us.scale.is_finite()) {
                return Err(format!("unit {}: bad proposal scale {}", u.id, us.scale));
            }
        }
        if self.state.mu.iter().any(|x| !x.is_finite()) {
            return Err("non-finite mu".into());
        }
        if self.state.sigma.iter().any(|x| !x.is_finite()) {
            return Err("non-finite sigma".into());
        }
        Ok(())
    }

    fn record_row(&self) -> DrawRow {
        let est = compute_estimands(
            self.state.units.iter().map(|u| u.cells.as_slice()),
            &self.dims,
        );
        let d = self.dims.omega_dim();
        let mut values = est.flatten();
        values.extend(self.state.mu.iter().copied());
        for i in 0..d {
            for j in i..d {
                values.push(self.state.sigma[(i, j)]);
            }
        }
        DrawRow { chain: self.chain_id, iteration: self.sweep_idx, values }
    }

    /// Burn in, then retain `n_keep` draws `thin` sweeps apart.
    pub fn run(mut self) -> Result<ChainOutput> {
        for _ in 0..self.cfg.n_burnin {
            self.sweep();
        }
        let mut rows = Vec::with_capacity(self.cfg.n_keep as usize);
        for _ in 0..self.cfg.n_keep {
            for _ in 0..self.cfg.thin {
                self.sweep();
            }
            rows.push(self.record_row());
        }
        let n_units = self.state.units.len().max(1);
        let report = ChainReport {
            chain_id: self.chain_id,
            dropped_units: self.dropped.clone(),
            counts_proposed: self.counts_proposed,
            counts_accepted: self.counts_accepted,
            omega_proposed: self.omega_proposed,
            omega_accepted: self.omega_accepted,
            sigma_jitter_events: self.sigma_jitter_events,
            mean_final_scale: self.state.units.iter().map(|u| u.scale).sum::<f64>()
                / n_units as f64,
        };
        let draws = DrawStore {
            columns: draw_columns(&self.dims),
            rows,
            sources: vec![format!("chain{}", self.chain_id)],
        };
        Ok(ChainOutput { draws, report })
    }
}

/// Run a single chain (chain id 0).
pub fn run_chain(d: &Dataset, hyper: &HyperPrior, cfg: &ChainConfig) -> Result<ChainOutput> {
    Chain::new(d, hyper, cfg, 0)?.run()
}

/// Run several chains with ids 0..n_chains and pool their draws in id order.
/// Chains run through a parallel scheduler; the derived RNG streams make the
/// result identical to a serial run.
pub fn run_chains(
    d: &Dataset,
    hyper: &HyperPrior,
    cfg: &ChainConfig,
    n_chains: u32,
) -> Result<(DrawStore, Vec<ChainReport>)> {
    if n_chains == 0 {
        return Err(Error::config("need at least one chain"));
    }
    let outputs: Vec<ChainOutput> = (0..n_chains)
        .into_par_iter()
        .map(|id| Chain::new(d, hyper, cfg, id)?.run())
        .collect::<Result<Vec<_>>>()?;
    let mut it = outputs.into_iter();
    let first = it.next().expect("n_chains >= 1");
    let mut store = first.draws;
    let mut reports = vec![first.report];
    for out in it {
        store.rows.extend(out.draws.rows);
        store.sources.extend(out.draws.sources);
        reports.push(out.report);
    }
    Ok((store, reports))
}
