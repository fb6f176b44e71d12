//! End-to-end checks of the `ecolinf` binary: each subcommand against real
//! files, plus the exit-code contract (1 = data problems, 2 = config
//! problems).

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ecolinf"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn ecolinf");
    assert!(
        out.status.success(),
        "expected success\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn simulate_into(dir: &Path, extra: &[&str]) {
    let mut cmd = bin();
    cmd.args([
        "simulate",
        "--out-dir",
        dir.to_str().unwrap(),
        "--n-precincts",
        "8",
        "--seed",
        "5",
    ]);
    cmd.args(extra);
    run_ok(&mut cmd);
}

#[test]
fn simulate_writes_the_jurisdiction_files() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    simulate_into(&dir, &["--scheme", "s2", "--n-sample", "4", "--fraction", "0.25"]);
    for f in ["ecological.csv", "truth_cells.csv", "truth_estimands.json", "survey.csv", "design.csv"]
    {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    let eco = std::fs::read_to_string(dir.join("ecological.csv")).unwrap();
    assert!(eco.starts_with("unit_id,black,white,hispanic,dem,rep,Abstain"));
    assert_eq!(eco.lines().count(), 9);
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("truth_estimands.json")).unwrap())
            .unwrap();
    assert_eq!(truth.as_array().unwrap().len(), 12);
}

#[test]
fn fit_writes_draws_and_summary_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    simulate_into(&dir, &["--scheme", "uniform", "--n-sample", "4", "--fraction", "0.25"]);
    let fit = |draws: &str, summary: &str| {
        run_ok(bin().args([
            "fit",
            "--ecological",
            dir.join("ecological.csv").to_str().unwrap(),
            "--races",
            "black,white,hispanic",
            "--survey",
            dir.join("survey.csv").to_str().unwrap(),
            "--burnin",
            "300",
            "--keep",
            "150",
            "--thin",
            "1",
            "--seed",
            "9",
            "--out-draws",
            tmp.path().join(draws).to_str().unwrap(),
            "--out-summary",
            tmp.path().join(summary).to_str().unwrap(),
        ]))
    };
    let out = fit("d1.csv", "s1.json");
    assert!(String::from_utf8_lossy(&out.stdout).contains("lambda_hispanic_dem"));
    fit("d2.csv", "s2.json");
    let d1 = std::fs::read_to_string(tmp.path().join("d1.csv")).unwrap();
    let d2 = std::fs::read_to_string(tmp.path().join("d2.csv")).unwrap();
    assert_eq!(d1, d2, "same seed must reproduce the draws file byte for byte");
    assert_eq!(d1.lines().count(), 151);

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("s1.json")).unwrap())
            .unwrap();
    let estimands = summary["estimands"].as_array().unwrap();
    assert_eq!(estimands.len(), 12);
    assert!(estimands.iter().all(|e| e["point"].is_number()));
}

#[test]
fn repeated_survey_flags_pool_chains() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    simulate_into(&dir, &["--scheme", "uniform", "--n-sample", "4", "--fraction", "0.25"]);
    let survey = dir.join("survey.csv");
    let draws_path = tmp.path().join("pooled.csv");
    run_ok(bin().args([
        "fit",
        "--ecological",
        dir.join("ecological.csv").to_str().unwrap(),
        "--races",
        "black,white,hispanic",
        "--survey",
        survey.to_str().unwrap(),
        "--survey",
        survey.to_str().unwrap(),
        "--burnin",
        "200",
        "--keep",
        "80",
        "--thin",
        "1",
        "--out-draws",
        draws_path.to_str().unwrap(),
    ]));
    let draws = std::fs::read_to_string(&draws_path).unwrap();
    assert_eq!(draws.lines().count(), 161, "two pooled fits of 80 draws each");
    let chains: std::collections::HashSet<&str> = draws
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(chains, ["0", "1"].into_iter().collect());
}

#[test]
fn summarize_reads_draws_back_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    simulate_into(&dir, &[]);
    let draws = tmp.path().join("d.csv");
    run_ok(bin().args([
        "fit",
        "--ecological",
        dir.join("ecological.csv").to_str().unwrap(),
        "--races",
        "black,white,hispanic",
        "--ei-only",
        "--burnin",
        "200",
        "--keep",
        "100",
        "--thin",
        "1",
        "--out-draws",
        draws.to_str().unwrap(),
    ]));
    let summary = tmp.path().join("s.json");
    let plot = tmp.path().join("p.svg");
    let out = run_ok(bin().args([
        "summarize",
        "--draws",
        draws.to_str().unwrap(),
        "--level",
        "0.5",
        "--out-summary",
        summary.to_str().unwrap(),
        "--out-plot",
        plot.to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("turnout_hispanic"));
    let svg = std::fs::read_to_string(&plot).unwrap();
    assert!(svg.starts_with("<svg"));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(parsed["estimands"][0]["level"], 0.5);
}

#[test]
fn aggregation_map_is_applied() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    simulate_into(&dir, &[]);
    // Merge the first two precincts; everything else stays itself.
    let mut map = String::from("precinct_id,location_id\n");
    map.push_str("p0001,loc_a\np0002,loc_a\n");
    for i in 3..=8 {
        map.push_str(&format!("p{i:04},p{i:04}\n"));
    }
    let map_path = tmp.path().join("agg.csv");
    std::fs::write(&map_path, map).unwrap();
    run_ok(bin().args([
        "fit",
        "--ecological",
        dir.join("ecological.csv").to_str().unwrap(),
        "--races",
        "black,white,hispanic",
        "--ei-only",
        "--aggregation",
        map_path.to_str().unwrap(),
        "--aggregation-scope",
        "all",
        "--burnin",
        "100",
        "--keep",
        "50",
        "--thin",
        "1",
    ]));
}

#[test]
fn compare_writes_the_metrics_table() {
    let tmp = tempfile::tempdir().unwrap();
    let config = serde_json::json!({
        "replicates": 2,
        "seed": 3,
        "sim": {"n_precincts": 10},
        "estimators": ["survey_uniform", "hybrid_uniform"],
        "n_sample": 5,
        "sampling_fraction": 0.25,
        "mcmc": {"n_burnin": 200, "n_keep": 100, "thin": 1}
    });
    let cfg_path = tmp.path().join("exp.json");
    std::fs::write(&cfg_path, config.to_string()).unwrap();
    let metrics = tmp.path().join("metrics.csv");
    let outcomes = tmp.path().join("outcomes.json");
    let out = run_ok(bin().args([
        "compare",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        metrics.to_str().unwrap(),
        "--out-outcomes",
        outcomes.to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("hybrid_uniform"));
    let table = std::fs::read_to_string(&metrics).unwrap();
    assert!(table.starts_with(
        "estimator,n_used,n_missing,n_failed,rmse,coverage,mean_interval_length,\
         wins_vs_survey_uniform,wins_vs_hybrid_uniform,p_vs_survey_uniform,p_vs_hybrid_uniform"
    ));
    assert_eq!(table.lines().count(), 3);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&outcomes).unwrap()).unwrap();
    assert_eq!(parsed.as_array().unwrap().len(), 2);
}

#[test]
fn missing_data_exits_one_and_bad_config_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "fit",
            "--ecological",
            tmp.path().join("nope.csv").to_str().unwrap(),
            "--races",
            "a,b",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "missing input file is a data error");

    let cfg_path = tmp.path().join("exp.json");
    std::fs::write(&cfg_path, "{\"target\": \"bogus_estimand\"}").unwrap();
    let out = bin()
        .args([
            "compare",
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            tmp.path().join("m.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "bad experiment config is a config error");

    // Clap usage errors are also exit 2.
    let out = bin().args(["fit", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Margins that cannot be satisfied are data errors (exit 1).
    let eco = tmp.path().join("bad.csv");
    std::fs::write(&eco, "unit_id,a,b,x,y\np1,5,5,20,30\n").unwrap();
    let out = bin()
        .args([
            "fit",
            "--ecological",
            eco.to_str().unwrap(),
            "--races",
            "a,b",
            "--burnin",
            "10",
            "--keep",
            "10",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "invalid margins are a data error");
}
