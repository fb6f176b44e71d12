//! `ecolinf`: fit the hierarchical count model to precinct margins (plus
//! optional in-precinct surveys), generate synthetic jurisdictions, run
//! replicated estimator comparisons, and summarize saved draws.

mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ecolinf::data::{aggregate_to_locations, AggregationScope, Dataset};
use ecolinf::estimands::{correlation_blocks, estimand_labels, summarize};
use ecolinf::harness::{pool_draws, run_experiment, ExperimentConfig};
use ecolinf::io::{
    read_aggregation_csv, read_draws_csv, read_ecological_csv, read_json_config,
    read_long_counts_csv, write_design_csv, write_draws_csv, write_ecological_csv,
    write_long_counts_csv, write_metrics_csv, write_summary_json, write_truth_estimands_json,
    ModelConfig, SummaryFile, SummaryRecord,
};
use ecolinf::rngstream::{derive_key, tags};
use ecolinf::sampler::{run_chains, ChainReport, DrawStore};
use ecolinf::simgen::{
    draw_survey, gen_jurisdiction, scheme_weights, select_precincts, BiasLevel, Integration,
    Scheme, SimConfig,
};
use ecolinf::survey::{rosen_inclusion_probs, SurveyDesign};
use ecolinf::Error;

#[derive(Parser)]
#[command(
    name = "ecolinf",
    version,
    about = "Hierarchical count model for ecological tables with optional in-precinct surveys"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit the model to a margin table (and surveys) and summarize the
    /// posterior.
    Fit(FitArgs),
    /// Generate a synthetic jurisdiction with known cell-level truth.
    Simulate(SimulateArgs),
    /// Run a replicated estimator comparison from a JSON experiment config.
    Compare(CompareArgs),
    /// Summarize a saved draws file.
    Summarize(SummarizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    /// Merge every precinct according to the map.
    All,
    /// Merge only locations that contain a surveyed precinct.
    InSampleOnly,
}

impl From<ScopeArg> for AggregationScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::All => AggregationScope::All,
            ScopeArg::InSampleOnly => AggregationScope::InSampleOnly,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Wide margin table: unit_id, one column per race, one per choice.
    #[arg(long)]
    ecological: PathBuf,
    /// Race column names, in the order rows should be indexed.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    races: Vec<String>,
    /// Long-format survey counts; repeat the flag to pool fits over several
    /// survey versions (for example, imputed resolutions of the same survey).
    #[arg(long)]
    survey: Vec<PathBuf>,
    /// Ignore any surveys and fit the margins alone.
    #[arg(long)]
    ei_only: bool,
    /// Precinct-to-location map for merging shared polling places.
    #[arg(long)]
    aggregation: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    aggregation_scope: ScopeArg,
    /// JSON with prior overrides and sampler settings.
    #[arg(long)]
    model_config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    chains: u32,
    #[arg(long)]
    burnin: Option<u64>,
    #[arg(long)]
    keep: Option<u64>,
    #[arg(long)]
    thin: Option<u64>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Schedule per-unit updates in parallel (same results, different
    /// wall-clock).
    #[arg(long)]
    parallel_units: bool,
    /// Write retained draws as CSV.
    #[arg(long)]
    out_draws: Option<PathBuf>,
    /// Write posterior summaries as JSON.
    #[arg(long)]
    out_summary: Option<PathBuf>,
    /// Include between-race correlation summaries in the summary file.
    #[arg(long)]
    include_correlations: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Full jurisdiction description as JSON; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    integration: Option<IntegrationArg>,
    #[arg(long, value_enum)]
    bias: Option<BiasArg>,
    #[arg(long)]
    n_precincts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory to write the jurisdiction files into.
    #[arg(long)]
    out_dir: PathBuf,
    /// Also draw a precinct sample and survey under this weighting scheme.
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Precincts to sample (defaults to a quarter of the jurisdiction).
    #[arg(long)]
    n_sample: Option<usize>,
    /// Within-precinct sampling fraction.
    #[arg(long, default_value_t = 1.0 / 16.0)]
    fraction: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum IntegrationArg {
    Integrated,
    LessIntegrated,
}

#[derive(Clone, Copy, ValueEnum)]
enum BiasArg {
    None,
    Moderate,
    Severe,
}

#[derive(Args)]
struct CompareArgs {
    /// Experiment description as JSON.
    #[arg(long)]
    config: PathBuf,
    /// Metrics table destination (CSV).
    #[arg(long)]
    out: PathBuf,
    /// Optionally dump every replicate's estimates as JSON.
    #[arg(long)]
    out_outcomes: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parallel_replicates: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Draws file written by `fit --out-draws`.
    #[arg(long)]
    draws: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long)]
    out_summary: Option<PathBuf>,
    /// Render the summaries as an SVG interval plot.
    #[arg(long)]
    out_plot: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Compare(a) => cmd_compare(a),
        Cmd::Summarize(a) => cmd_summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            // Config mistakes exit 2 (like usage errors); bad or missing
            // data exits 1.
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn report_chain(report: &ChainReport) {
    if !report.dropped_units.is_empty() {
        eprintln!(
            "chain {}: dropped {} zero-population unit(s): {}",
            report.chain_id,
            report.dropped_units.len(),
            report.dropped_units.join(", ")
        );
    }
    eprintln!(
        "chain {}: swap acceptance {:.3}, walk acceptance {:.3}, mean walk scale {:.3}{}",
        report.chain_id,
        report.counts_accept_rate(),
        report.omega_accept_rate(),
        report.mean_final_scale,
        if report.sigma_jitter_events > 0 {
            format!(", {} covariance jitter event(s)", report.sigma_jitter_events)
        } else {
            String::new()
        }
    );
}

fn summarize_store(draws: &DrawStore, columns: &[String], level: f64) -> Vec<SummaryRecord> {
    columns
        .iter()
        .map(|label| match draws.column_values(label) {
            Ok(values) => match summarize(&values, level) {
                Ok(s) => SummaryRecord::defined(label.clone(), &s),
                Err(_) => SummaryRecord::undefined(label.clone(), level, values.len()),
            },
            Err(_) => SummaryRecord::undefined(label.clone(), level, 0),
        })
        .collect()
}

fn print_records(records: &[SummaryRecord]) {
    let width = records.iter().map(|r| r.estimand.len()).max().unwrap_or(8).max(8);
    println!(
        "{:width$}  {:>10}  {:>10}  {:>10}  {:>8}",
        "estimand", "point", "lo", "hi", "n_draws"
    );
    for r in records {
        match (r.point, r.lo, r.hi) {
            (Some(p), Some(lo), Some(hi)) => println!(
                "{:width$}  {:>10.4}  {:>10.4}  {:>10.4}  {:>8}",
                r.estimand, p, lo, hi, r.n_draws
            ),
            _ => println!(
                "{:width$}  {:>10}  {:>10}  {:>10}  {:>8}",
                r.estimand, "NA", "NA", "NA", r.n_draws
            ),
        }
    }
}

fn cmd_fit(a: FitArgs) -> Result<(), Error> {
    if a.races.len() < 2 {
        return Err(Error::config("at least two races required (--races a,b,...)"));
    }
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Error::config("level must be in (0, 1)"));
    }
    let (dims, tables) = read_ecological_csv(&a.ecological, &a.races)?;
    let surveys: Vec<_> = if a.ei_only {
        Vec::new()
    } else {
        a.survey
            .iter()
            .map(|p| read_long_counts_csv(p, &dims))
            .collect::<Result<_, _>>()?
    };
    let aggregation = a.aggregation.as_deref().map(read_aggregation_csv).transpose()?;

    let model: ModelConfig = match &a.model_config {
        Some(p) => read_json_config(p)?,
        None => ModelConfig::default(),
    };
    let hyper = model.prior.resolve(&dims)?;
    let mut chain_cfg = model.chain.clone().unwrap_or_default();
    if let Some(s) = a.seed {
        chain_cfg.seed = s;
    }
    if let Some(b) = a.burnin {
        chain_cfg.n_burnin = b;
    }
    if let Some(k) = a.keep {
        chain_cfg.n_keep = k;
    }
    if let Some(t) = a.thin {
        chain_cfg.thin = t;
    }
    chain_cfg.parallel_units |= a.parallel_units;

    // One fit per survey version; several versions pool into one set of
    // draws. No survey (or --ei-only) is a single margins-only fit.
    let versions: Vec<Vec<ecolinf::data::SurveyCounts>> =
        if surveys.is_empty() { vec![Vec::new()] } else { surveys };
    let n_versions = versions.len();
    let mut stores = Vec::with_capacity(n_versions);
    for (j, svy) in versions.into_iter().enumerate() {
        let mut dataset = Dataset::new(dims.clone(), tables.clone(), svy);
        if let Some(map) = &aggregation {
            dataset = aggregate_to_locations(&dataset, map, a.aggregation_scope.into())?;
        }
        let mut cfg = chain_cfg.clone();
        if n_versions > 1 {
            cfg.seed = derive_key(chain_cfg.seed, &[tags::IMPUTE, j as u64]);
            eprintln!("fitting survey version {} of {n_versions}", j + 1);
        }
        let (draws, reports) = run_chains(&dataset, &hyper, &cfg, a.chains)?;
        for r in &reports {
            report_chain(r);
        }
        stores.push(draws);
    }
    let draws = if stores.len() == 1 {
        stores.pop().expect("one store")
    } else {
        pool_draws(&stores)?
    };

    let records = summarize_store(&draws, &estimand_labels(&dims), a.level);
    print_records(&records);
    let correlations = if a.include_correlations {
        Some(correlation_blocks(&draws.sigma_draws(dims.omega_dim())?, &dims, a.level)?)
    } else {
        None
    };
    if let Some(path) = &a.out_summary {
        write_summary_json(path, &SummaryFile { estimands: records, correlations })?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = &a.out_draws {
        write_draws_csv(path, &draws)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<(), Error> {
    let mut cfg: SimConfig = match &a.config {
        Some(p) => read_json_config(p)?,
        None => SimConfig::default(),
    };
    if let Some(i) = a.integration {
        let i = match i {
            IntegrationArg::Integrated => Integration::Integrated,
            IntegrationArg::LessIntegrated => Integration::LessIntegrated,
        };
        cfg.dirichlet = vec![i.dirichlet_concentration(); cfg.races.len()];
    }
    if let Some(b) = a.bias {
        cfg.bias = match b {
            BiasArg::None => BiasLevel::None,
            BiasArg::Moderate => BiasLevel::Moderate,
            BiasArg::Severe => BiasLevel::Severe,
        };
    }
    if let Some(n) = a.n_precincts {
        cfg.n_precincts = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }

    let (data, truth) = gen_jurisdiction(&cfg)?;
    std::fs::create_dir_all(&a.out_dir)?;
    let out = |name: &str| a.out_dir.join(name);
    write_ecological_csv(&out("ecological.csv"), &data.dims, &data.tables)?;
    write_long_counts_csv(
        &out("truth_cells.csv"),
        &data.dims,
        truth.unit_cells.iter().map(|(id, c)| (id.as_str(), c.as_slice())),
    )?;
    write_truth_estimands_json(&out("truth_estimands.json"), &data.dims, &truth.estimands)?;
    println!("wrote ecological.csv, truth_cells.csv, truth_estimands.json");

    if let Some(scheme) = a.scheme {
        let n_sample = a.n_sample.unwrap_or(cfg.n_precincts.div_ceil(4));
        let ids = select_precincts(&data, scheme, n_sample, cfg.seed)?;
        let surveys = draw_survey(&truth, &ids, a.fraction, cfg.seed)?;
        write_long_counts_csv(
            &out("survey.csv"),
            &data.dims,
            surveys.iter().map(|s| (s.unit_id.as_str(), s.counts.as_slice())),
        )?;
        let weights = scheme_weights(&data, scheme)?;
        let probs = rosen_inclusion_probs(&weights, n_sample)?;
        let sampled: Vec<f64> = data
            .tables
            .iter()
            .zip(&probs)
            .filter(|(t, _)| ids.contains(&t.unit_id))
            .map(|(_, &p)| p)
            .collect();
        let design = SurveyDesign::from_inclusion_probs(&ids, &sampled, a.fraction)?;
        write_design_csv(&out("design.csv"), &design)?;
        println!(
            "wrote survey.csv and design.csv ({} precincts, scheme {scheme}, fraction {})",
            ids.len(),
            a.fraction
        );
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), Error> {
    let mut cfg: ExperimentConfig = read_json_config(&a.config)?;
    if let Some(r) = a.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.parallel_replicates |= a.parallel_replicates;
    let n_fits: usize = cfg
        .estimators
        .iter()
        .filter(|e| !matches!(e, ecolinf::harness::EstimatorId::Survey(_)))
        .count()
        * cfg.replicates;
    eprintln!(
        "{} replicates, {} estimators ({} model fits); this can take a while",
        cfg.replicates,
        cfg.estimators.len(),
        n_fits
    );
    let out = run_experiment(&cfg)?;
    write_metrics_csv(&a.out, &out.metrics)?;
    eprintln!("wrote {}", a.out.display());
    if let Some(path) = &a.out_outcomes {
        std::fs::write(path, serde_json::to_string_pretty(&out.outcomes)?)?;
        eprintln!("wrote {}", path.display());
    }
    println!(
        "{:14} {:>6} {:>8} {:>9} {:>9}",
        "estimator", "used", "rmse", "coverage", "length"
    );
    for row in &out.metrics.rows {
        println!(
            "{:14} {:>6} {:>8.4} {:>9.3} {:>9.4}",
            row.estimator, row.n_used, row.rmse, row.coverage, row.mean_interval_length
        );
    }
    Ok(())
}

fn cmd_summarize(a: SummarizeArgs) -> Result<(), Error> {
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Error::config("level must be in (0, 1)"));
    }
    let draws = read_draws_csv(&a.draws)?;
    let records = summarize_store(&draws, &draws.columns.clone(), a.level);
    print_records(&records);
    if let Some(path) = &a.out_summary {
        write_summary_json(path, &SummaryFile { estimands: records.clone(), correlations: None })?;
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = &a.out_plot {
        std::fs::write(path, plot::interval_plot_svg(&records))?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scope_arg_maps_to_library_scope() {
        assert_eq!(AggregationScope::from(ScopeArg::All), AggregationScope::All);
        assert_eq!(
            AggregationScope::from(ScopeArg::InSampleOnly),
            AggregationScope::InSampleOnly
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
