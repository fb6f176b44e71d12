//! Generate a synthetic jurisdiction, fit the count model at desk scale,
//! and print timing plus a few posterior summaries next to the truth.

use ecolinf::estimands::{estimand_labels, summarize};
use ecolinf::harness::{run_experiment, EstimatorId, ExperimentConfig};
use ecolinf::sampler::{run_chains, ChainConfig, HyperPrior};
use ecolinf::simgen::{draw_survey, gen_jurisdiction, select_precincts, Scheme, SimConfig};

fn main() {
    let sim = SimConfig { seed: 7, ..SimConfig::default() };
    let (data, truth) = gen_jurisdiction(&sim).unwrap();
    let dims = data.dims.clone();
    let sample = select_precincts(&data, Scheme::S2, 38, 7).unwrap();
    let surveys = draw_survey(&truth, &sample, 1.0 / 16.0, 7).unwrap();
    let data = ecolinf::data::Dataset::new(dims.clone(), data.tables, surveys);

    let cfg = ChainConfig { seed: 7, ..ChainConfig::desk_scale() };
    let hyper = HyperPrior::default_for(&dims);
    let t0 = std::time::Instant::now();
    let (draws, reports) = run_chains(&data, &hyper, &cfg, 1).unwrap();
    let dt = t0.elapsed();
    let sweeps = cfg.n_burnin + cfg.n_keep * cfg.thin;
    println!(
        "fit: {} units, {} sweeps in {:.1?} ({:.0} sweeps/s)",
        data.tables.len(),
        sweeps,
        dt,
        sweeps as f64 / dt.as_secs_f64()
    );
    for r in &reports {
        println!(
            "chain {}: counts acceptance {:.3}, walk acceptance {:.3}, mean scale {:.3}",
            r.chain_id,
            r.counts_accept_rate(),
            r.omega_accept_rate(),
            r.mean_final_scale
        );
    }
    let labels = estimand_labels(&dims);
    for (label, truth_v) in labels.iter().zip(truth.estimands.flatten()) {
        let s = summarize(&draws.column_values(label).unwrap(), 0.95).unwrap();
        println!(
            "{label:24} truth {truth_v:.4}  posterior {:.4} [{:.4}, {:.4}]",
            s.point, s.lo, s.hi
        );
    }

    // A two-replicate experiment, to show the comparison harness end to end.
    let exp = ExperimentConfig {
        replicates: 2,
        seed: 7,
        estimators: vec![
            EstimatorId::Ei,
            EstimatorId::Survey(Scheme::S2),
            EstimatorId::Hybrid(Scheme::S2),
        ],
        ..ExperimentConfig::default()
    };
    let t0 = std::time::Instant::now();
    let out = run_experiment(&exp).unwrap();
    println!("\n2-replicate experiment in {:.1?}", t0.elapsed());
    for row in &out.metrics.rows {
        println!(
            "{:12} used {} rmse {:.4} coverage {:.2} length {:.4}",
            row.estimator, row.n_used, row.rmse, row.coverage, row.mean_interval_length
        );
    }
}
