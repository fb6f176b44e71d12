//! File formats: margin tables, long-format counts, sampling designs, draw
//! matrices, experiment metrics, summaries, and JSON configs.
//!
//! CSV conventions: `NA` marks an undefined number (NaN in memory); floats
//! are written with Rust's shortest round-trip formatting. The margin table
//! is wide (one row per precinct); individual-level counts (surveys, truth
//! tables) are long (`unit_id,race,choice,count`).

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{AggregationMap, Dimensions, EcologicalTable, SurveyCounts, ABSTAIN};
use crate::error::{Error, Result};
use crate::estimands::{CorrelationBlock, EstimandSet, Summary};
use crate::harness::MetricsTable;
use crate::sampler::{ChainConfig, DrawRow, DrawStore, HyperPrior};
use crate::survey::{DesignUnit, SurveyDesign};

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

fn parse_f64(s: &str, context: &str) -> Result<f64> {
    match s {
        "NA" | "NaN" | "nan" | "" => Ok(f64::NAN),
        _ => s
            .parse()
            .map_err(|_| Error::data(format!("{context}: cannot parse number {s:?}"))),
    }
}

fn parse_i64(s: &str, context: &str) -> Result<i64> {
    s.parse()
        .map_err(|_| Error::data(format!("{context}: cannot parse count {s:?}")))
}

/// Read a wide margin table: `unit_id` column, one column per race, and the
/// remaining columns as choices in header order. If no `Abstain` column is
/// present it is derived per precinct as population minus votes cast (a
/// negative result is kept and flagged by validation).
pub fn read_ecological_csv(
    path: &Path,
    races: &[String],
) -> Result<(Dimensions, Vec<EcologicalTable>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let unit_idx = col("unit_id")
        .ok_or_else(|| Error::data(format!("{}: no unit_id column", path.display())))?;
    let mut race_idx = Vec::with_capacity(races.len());
    for r in races {
        race_idx.push(col(r).ok_or_else(|| {
            Error::data(format!("{}: no column for race {r}", path.display()))
        })?);
    }
    let mut choice_cols: Vec<(usize, String)> = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if i != unit_idx && !race_idx.contains(&i) {
            choice_cols.push((i, h.to_string()));
        }
    }
    let has_abstain = choice_cols.iter().any(|(_, name)| name == ABSTAIN);
    let mut choices: Vec<String> = choice_cols.iter().map(|(_, n)| n.clone()).collect();
    if !has_abstain {
        choices.push(ABSTAIN.into());
    }
    let dims = Dimensions::new(races.to_vec(), choices)?;

    let mut tables = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let ctx = format!("{} row {}", path.display(), line + 2);
        let unit_id = record
            .get(unit_idx)
            .ok_or_else(|| Error::data(format!("{ctx}: short record")))?
            .to_string();
        let mut row_totals = Vec::with_capacity(races.len());
        for (&idx, race) in race_idx.iter().zip(races) {
            row_totals.push(parse_i64(
                record.get(idx).unwrap_or(""),
                &format!("{ctx} ({race})"),
            )?);
        }
        let mut col_totals = vec![0i64; dims.n_choices()];
        let mut votes = 0i64;
        for (idx, name) in &choice_cols {
            let v = parse_i64(record.get(*idx).unwrap_or(""), &format!("{ctx} ({name})"))?;
            col_totals[dims.choice_index(name).expect("choice from header")] = v;
            if name != ABSTAIN {
                votes += v;
            }
        }
        if !has_abstain {
            let pop: i64 = row_totals.iter().sum();
            col_totals[dims.abstain_col()] = pop - votes;
        }
        tables.push(EcologicalTable { unit_id, row_totals, col_totals });
    }
    Ok((dims, tables))
}

/// Write the wide margin table (Abstain written explicitly).
pub fn write_ecological_csv(
    path: &Path,
    dims: &Dimensions,
    tables: &[EcologicalTable],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["unit_id".to_string()];
    header.extend(dims.races().iter().cloned());
    header.extend(dims.choices().iter().cloned());
    w.write_record(&header)?;
    for t in tables {
        let mut rec = vec![t.unit_id.clone()];
        rec.extend(t.row_totals.iter().map(|v| v.to_string()));
        rec.extend(t.col_totals.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read long-format cell counts (`unit_id,race,choice,count`), used for both
/// surveys and true cell tables. Unlisted cells are zero; listing a cell
/// twice is an error. Units appear in first-appearance order.
pub fn read_long_counts_csv(path: &Path, dims: &Dimensions) -> Result<Vec<SurveyCounts>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("{}: no {name} column", path.display())))
    };
    let (ui, ri, ci, ki) = (idx("unit_id")?, idx("race")?, idx("choice")?, idx("count")?);
    let mut order: Vec<SurveyCounts> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut seen: std::collections::HashSet<(usize, usize)> = Default::default();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let ctx = format!("{} row {}", path.display(), line + 2);
        let get = |i: usize| record.get(i).unwrap_or("");
        let unit = get(ui).to_string();
        let race = dims
            .race_index(get(ri))
            .ok_or_else(|| Error::data(format!("{ctx}: unknown race {:?}", get(ri))))?;
        let choice = dims
            .choice_index(get(ci))
            .ok_or_else(|| Error::data(format!("{ctx}: unknown choice {:?}", get(ci))))?;
        let count = parse_i64(get(ki), &ctx)?;
        let slot = *by_id.entry(unit.clone()).or_insert_with(|| {
            order.push(SurveyCounts { unit_id: unit, counts: vec![0; dims.n_cells()] });
            order.len() - 1
        });
        if !seen.insert((slot, dims.cell(race, choice))) {
            return Err(Error::data(format!(
                "{ctx}: duplicate cell for unit {}",
                order[slot].unit_id
            )));
        }
        order[slot].counts[dims.cell(race, choice)] = count;
    }
    Ok(order)
}

/// Write long-format cell counts; every cell is listed, zeros included.
pub fn write_long_counts_csv<'a, I>(path: &Path, dims: &Dimensions, units: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a [i64])>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["unit_id", "race", "choice", "count"])?;
    for (id, cells) in units {
        debug_assert_eq!(cells.len(), dims.n_cells());
        for (r, race) in dims.races().iter().enumerate() {
            for (c, choice) in dims.choices().iter().enumerate() {
                w.write_record([id, race, choice, &cells[dims.cell(r, c)].to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Read a precinct-to-location aggregation map (`precinct_id,location_id`).
pub fn read_aggregation_csv(path: &Path) -> Result<AggregationMap> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("{}: no {name} column", path.display())))
    };
    let (pi, li) = (idx("precinct_id")?, idx("location_id")?);
    let mut map = std::collections::BTreeMap::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let p = record.get(pi).unwrap_or("").to_string();
        let l = record.get(li).unwrap_or("").to_string();
        if map.insert(p.clone(), l).is_some() {
            return Err(Error::data(format!(
                "{} row {}: precinct {p} mapped twice",
                path.display(),
                line + 2
            )));
        }
    }
    Ok(AggregationMap::new(map))
}

/// Read cluster design records (`unit_id,stratum,weight,within_fraction`).
pub fn read_design_csv(path: &Path) -> Result<SurveyDesign> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    let idx = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::data(format!("{}: no {name} column", path.display())))
    };
    let (ui, si, wi, fi) =
        (idx("unit_id")?, idx("stratum")?, idx("weight")?, idx("within_fraction")?);
    let mut units = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let ctx = format!("{} row {}", path.display(), line + 2);
        units.push(DesignUnit {
            unit_id: record.get(ui).unwrap_or("").to_string(),
            stratum: record.get(si).unwrap_or("").to_string(),
            weight: parse_f64(record.get(wi).unwrap_or(""), &ctx)?,
            within_fraction: parse_f64(record.get(fi).unwrap_or(""), &ctx)?,
        });
    }
    Ok(SurveyDesign { units })
}

pub fn write_design_csv(path: &Path, design: &SurveyDesign) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["unit_id", "stratum", "weight", "within_fraction"])?;
    for u in &design.units {
        w.write_record([
            u.unit_id.as_str(),
            u.stratum.as_str(),
            &fmt_f64(u.weight),
            &fmt_f64(u.within_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write retained draws: `chain,iteration,<one column per tracked value>`.
pub fn write_draws_csv(path: &Path, draws: &DrawStore) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["chain".to_string(), "iteration".to_string()];
    header.extend(draws.columns.iter().cloned());
    w.write_record(&header)?;
    for row in &draws.rows {
        let mut rec = vec![row.chain.to_string(), row.iteration.to_string()];
        rec.extend(row.values.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a draws file back; chain labels are reconstructed from the ids.
pub fn read_draws_csv(path: &Path) -> Result<DrawStore> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = rdr.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "chain" || &headers[1] != "iteration" {
        return Err(Error::data(format!(
            "{}: expected a draws file starting with chain,iteration",
            path.display()
        )));
    }
    let mut store = DrawStore::new(headers.iter().skip(2).map(String::from).collect());
    let mut max_chain: Option<u32> = None;
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let ctx = format!("{} row {}", path.display(), line + 2);
        let chain: u32 = record
            .get(0)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("{ctx}: bad chain id")))?;
        let iteration: u64 = record
            .get(1)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::data(format!("{ctx}: bad iteration")))?;
        let mut values = Vec::with_capacity(store.columns.len());
        for i in 0..store.columns.len() {
            values.push(parse_f64(record.get(i + 2).unwrap_or(""), &ctx)?);
        }
        max_chain = Some(max_chain.map_or(chain, |m| m.max(chain)));
        store.rows.push(DrawRow { chain, iteration, values });
    }
    if let Some(m) = max_chain {
        store.sources = (0..=m).map(|i| format!("chain{i}")).collect();
    }
    Ok(store)
}

/// Write the experiment scoreboard in wide form: fixed metric columns, then
/// `wins_vs_<estimator>` and `p_vs_<estimator>` pairs in row order.
pub fn write_metrics_csv(path: &Path, metrics: &MetricsTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "estimator".to_string(),
        "n_used".to_string(),
        "n_missing".to_string(),
        "n_failed".to_string(),
        "rmse".to_string(),
        "coverage".to_string(),
        "mean_interval_length".to_string(),
    ];
    for e in &metrics.estimators {
        header.push(format!("wins_vs_{e}"));
    }
    for e in &metrics.estimators {
        header.push(format!("p_vs_{e}"));
    }
    w.write_record(&header)?;
    for row in &metrics.rows {
        let mut rec = vec![
            row.estimator.clone(),
            row.n_used.to_string(),
            row.n_missing.to_string(),
            row.n_failed.to_string(),
            fmt_f64(row.rmse),
            fmt_f64(row.coverage),
            fmt_f64(row.mean_interval_length),
        ];
        rec.extend(row.wins_vs.iter().map(|&v| fmt_f64(v)));
        rec.extend(row.p_vs.iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One estimand's posterior summary as written to the summary file. A
/// missing point means no defined draws existed for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub estimand: String,
    pub point: Option<f64>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub level: f64,
    pub n_draws: usize,
    pub n_missing: usize,
}

impl SummaryRecord {
    pub fn defined(estimand: String, s: &Summary) -> Self {
        SummaryRecord {
            estimand,
            point: Some(s.point),
            lo: Some(s.lo),
            hi: Some(s.hi),
            level: s.level,
            n_draws: s.n_draws,
            n_missing: s.n_missing,
        }
    }

    pub fn undefined(estimand: String, level: f64, n_missing: usize) -> Self {
        SummaryRecord { estimand, point: None, lo: None, hi: None, level, n_draws: 0, n_missing }
    }
}

/// The summary file: per-estimand records, plus correlation blocks when
/// requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub estimands: Vec<SummaryRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlations: Option<Vec<CorrelationBlock>>,
}

pub fn write_summary_json(path: &Path, summary: &SummaryFile) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(summary)?)?;
    Ok(())
}

pub fn read_summary_json(path: &Path) -> Result<SummaryFile> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// True estimand values as written by the simulator (`null` = undefined).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthValue {
    pub estimand: String,
    pub value: Option<f64>,
}

pub fn write_truth_estimands_json(
    path: &Path,
    dims: &Dimensions,
    set: &EstimandSet,
) -> Result<()> {
    let records: Vec<TruthValue> = crate::estimands::estimand_labels(dims)
        .into_iter()
        .zip(set.flatten())
        .map(|(estimand, v)| TruthValue {
            estimand,
            value: if v.is_nan() { None } else { Some(v) },
        })
        .collect();
    std::fs::write(path, serde_json::to_string_pretty(&records)?)?;
    Ok(())
}

/// Read any JSON-encoded config (simulation, experiment, model settings).
pub fn read_json_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))
}

/// A matrix-valued prior setting: a bare number means that multiple of the
/// identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Full(Vec<Vec<f64>>),
}

impl MatrixSpec {
    fn resolve(&self, d: usize, what: &str) -> Result<DMatrix<f64>> {
        match self {
            MatrixSpec::Scalar(s) => Ok(DMatrix::identity(d, d) * *s),
            MatrixSpec::Full(rows) => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::config(format!("{what} must be {d} x {d}")));
                }
                Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
            }
        }
    }
}

/// Prior overrides; anything omitted keeps the weakly informative default.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub mu0: Option<Vec<f64>>,
    pub kappa0: Option<MatrixSpec>,
    pub nu0: Option<f64>,
    pub psi0: Option<MatrixSpec>,
}

impl PriorConfig {
    pub fn resolve(&self, dims: &Dimensions) -> Result<HyperPrior> {
        let d = dims.omega_dim();
        let mut h = HyperPrior::default_for(dims);
        if let Some(mu0) = &self.mu0 {
            if mu0.len() != d {
                return Err(Error::config(format!("mu0 must have length {d}")));
            }
            h.mu0 = DVector::from_column_slice(mu0);
        }
        if let Some(k) = &self.kappa0 {
            h.kappa0 = k.resolve(d, "kappa0")?;
        }
        if let Some(nu0) = self.nu0 {
            h.nu0 = nu0;
        }
        if let Some(p) = &self.psi0 {
            h.psi0 = p.resolve(d, "psi0")?;
        } else if self.nu0.is_some() {
            // Keep the default prior mean of Sigma at the identity.
            h.psi0 = DMatrix::identity(d, d) * (h.nu0 - d as f64 - 1.0);
        }
        h.validate(d)?;
        Ok(h)
    }
}

/// Model settings file for fits: prior overrides and sampler settings.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub prior: PriorConfig,
    pub chain: Option<ChainConfig>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{validate_dataset, Dataset};
    use proptest::prelude::*;

    fn dims() -> Dimensions {
        Dimensions::new(
            vec!["black".into(), "white".into()],
            vec!["dem".into(), "rep".into(), ABSTAIN.into()],
        )
        .unwrap()
    }

    fn tmp(name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn ecological_abstain_is_derived_when_absent() {
        let (dir, path) = tmp("e.csv");
        std::fs::write(&path, "unit_id,black,white,dem,rep\np1,60,40,30,20\np2,10,10,5,25\n")
            .unwrap();
        let (dims, tables) = read_ecological_csv(&path, &["black".into(), "white".into()])
            .unwrap();
        assert_eq!(dims.choices(), &["dem", "rep", ABSTAIN]);
        assert_eq!(tables[0].col_totals, vec![30, 20, 50]);
        // Votes exceeding population leave a negative abstain count for
        // validation to flag.
        assert_eq!(tables[1].col_totals, vec![5, 25, -10]);
        let d = Dataset::new(dims, tables, vec![]);
        assert!(!validate_dataset(&d).is_ok());
        drop(dir);
    }

    #[test]
    fn ecological_abstain_column_is_reordered_to_last() {
        let (dir, path) = tmp("e.csv");
        std::fs::write(
            &path,
            "unit_id,black,Abstain,white,dem,rep\np1,60,50,40,30,20\n",
        )
        .unwrap();
        let (dims, tables) =
            read_ecological_csv(&path, &["black".into(), "white".into()]).unwrap();
        assert_eq!(dims.choices(), &["dem", "rep", ABSTAIN]);
        assert_eq!(tables[0].col_totals, vec![30, 20, 50]);
        drop(dir);
    }

    #[test]
    fn ecological_round_trips() {
        let (dir, path) = tmp("e.csv");
        let dims = dims();
        let tables = vec![
            EcologicalTable {
                unit_id: "p1".into(),
                row_totals: vec![60, 40],
                col_totals: vec![30, 20, 50],
            },
            EcologicalTable {
                unit_id: "p2".into(),
                row_totals: vec![10, 10],
                col_totals: vec![5, 5, 10],
            },
        ];
        write_ecological_csv(&path, &dims, &tables).unwrap();
        let (dims2, tables2) =
            read_ecological_csv(&path, &["black".into(), "white".into()]).unwrap();
        assert_eq!(dims, dims2);
        assert_eq!(tables, tables2);
        drop(dir);
    }

    #[test]
    fn long_counts_round_trip_and_duplicate_detection() {
        let dims = dims();
        let (dir, path) = tmp("k.csv");
        let units = vec![
            SurveyCounts { unit_id: "p2".into(), counts: vec![1, 2, 3, 4, 5, 6] },
            SurveyCounts { unit_id: "p1".into(), counts: vec![0, 0, 1, 0, 2, 0] },
        ];
        write_long_counts_csv(
            &path,
            &dims,
            units.iter().map(|s| (s.unit_id.as_str(), s.counts.as_slice())),
        )
        .unwrap();
        let back = read_long_counts_csv(&path, &dims).unwrap();
        assert_eq!(back, units);

        std::fs::write(
            &path,
            "unit_id,race,choice,count\np1,black,dem,3\np1,black,dem,4\n",
        )
        .unwrap();
        assert!(read_long_counts_csv(&path, &dims).is_err());
        std::fs::write(&path, "unit_id,race,choice,count\np1,martian,dem,3\n").unwrap();
        assert!(read_long_counts_csv(&path, &dims).is_err());
        drop(dir);
    }

    #[test]
    fn sparse_long_counts_default_to_zero() {
        let dims = dims();
        let (dir, path) = tmp("k.csv");
        std::fs::write(
            &path,
            "unit_id,race,choice,count\np9,white,rep,7\np9,black,Abstain,2\n",
        )
        .unwrap();
        let back = read_long_counts_csv(&path, &dims).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].counts, vec![0, 0, 2, 0, 7, 0]);
        drop(dir);
    }

    #[test]
    fn draws_round_trip_preserves_nan_as_na() {
        let (dir, path) = tmp("d.csv");
        let mut store = DrawStore::new(vec!["a".into(), "b".into()]);
        store.rows.push(DrawRow { chain: 0, iteration: 10, values: vec![0.1, f64::NAN] });
        store.rows.push(DrawRow {
            chain: 1,
            iteration: 11,
            values: vec![-3.5e-7, 2.0 / 3.0],
        });
        store.sources = vec!["chain0".into(), "chain1".into()];
        write_draws_csv(&path, &store).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("NA"), "{text}");
        let back = read_draws_csv(&path).unwrap();
        assert!(store.bit_identical(&back));
        drop(dir);
    }

    #[test]
    fn aggregation_and_design_files_read_back() {
        let (dir, path) = tmp("a.csv");
        std::fs::write(&path, "precinct_id,location_id\np1,loc1\np2,loc1\np3,loc2\n")
            .unwrap();
        let map = read_aggregation_csv(&path).unwrap();
        assert_eq!(map.location_of("p2"), Some("loc1"));
        std::fs::write(&path, "precinct_id,location_id\np1,loc1\np1,loc2\n").unwrap();
        assert!(read_aggregation_csv(&path).is_err());

        let design = SurveyDesign {
            units: vec![DesignUnit {
                unit_id: "p1".into(),
                stratum: "all".into(),
                weight: 2.5,
                within_fraction: 0.0625,
            }],
        };
        let dpath = dir.path().join("design.csv");
        write_design_csv(&dpath, &design).unwrap();
        assert_eq!(read_design_csv(&dpath).unwrap(), design);
        drop(dir);
    }

    #[test]
    fn metrics_csv_has_pairwise_columns() {
        use crate::harness::{MetricsRow, MetricsTable};
        let (dir, path) = tmp("m.csv");
        let metrics = MetricsTable {
            target: "lambda_black_dem".into(),
            level: 0.95,
            replicates: 2,
            estimators: vec!["ei".into(), "survey_s1".into()],
            rows: vec![MetricsRow {
                estimator: "ei".into(),
                n_used: 2,
                n_missing: 0,
                n_failed: 0,
                rmse: 0.1,
                coverage: 1.0,
                mean_interval_length: 0.5,
                wins_vs: vec![f64::NAN, 0.75],
                p_vs: vec![f64::NAN, 0.5],
            }],
        };
        write_metrics_csv(&path, &metrics).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "estimator,n_used,n_missing,n_failed,rmse,coverage,mean_interval_length,\
             wins_vs_ei,wins_vs_survey_s1,p_vs_ei,p_vs_survey_s1"
        );
        assert_eq!(lines.next().unwrap(), "ei,2,0,0,0.1,1,0.5,NA,0.75,NA,0.5");
        drop(dir);
    }

    #[test]
    fn summary_file_round_trips_with_missing_entries() {
        let (dir, path) = tmp("s.json");
        let file = SummaryFile {
            estimands: vec![
                SummaryRecord {
                    estimand: "lambda_black_dem".into(),
                    point: Some(0.5),
                    lo: Some(0.4),
                    hi: Some(0.6),
                    level: 0.9,
                    n_draws: 100,
                    n_missing: 0,
                },
                SummaryRecord::undefined("turnout_white".into(), 0.9, 100),
            ],
            correlations: None,
        };
        write_summary_json(&path, &file).unwrap();
        assert_eq!(read_summary_json(&path).unwrap(), file);
        assert!(!std::fs::read_to_string(&path).unwrap().contains("correlations"));
        drop(dir);
    }

    #[test]
    fn prior_config_resolves_scalars_and_defaults() {
        let dims = dims();
        let d = dims.omega_dim();
        let h = PriorConfig::default().resolve(&dims).unwrap();
        assert_eq!(h, HyperPrior::default_for(&dims));

        let cfg: PriorConfig =
            serde_json::from_str(r#"{"kappa0": 5.0, "nu0": 12.0}"#).unwrap();
        let h = cfg.resolve(&dims).unwrap();
        assert_eq!(h.kappa0, DMatrix::identity(d, d) * 5.0);
        assert_eq!(h.nu0, 12.0);
        // psi0 follows nu0 to keep the prior mean at the identity.
        assert_eq!(h.psi0, DMatrix::identity(d, d) * (12.0 - d as f64 - 1.0));

        let cfg: PriorConfig = serde_json::from_str(
            r#"{"mu0": [0.1, 0.2, 0.3, 0.4], "psi0": [[1,0,0,0],[0,1,0,0],[0,0,1,0],[0,0,0,1]]}"#,
        )
        .unwrap();
        let h = cfg.resolve(&dims).unwrap();
        assert_eq!(h.mu0, DVector::from_column_slice(&[0.1, 0.2, 0.3, 0.4]));
        assert_eq!(h.psi0, DMatrix::identity(d, d));

        let bad: PriorConfig = serde_json::from_str(r#"{"mu0": [0.1]}"#).unwrap();
        assert!(bad.resolve(&dims).is_err());
    }

    proptest! {
        #[test]
        fn draws_csv_round_trips_arbitrary_floats(
            values in proptest::collection::vec(
                prop_oneof![
                    any::<f64>().prop_filter("finite", |v| v.is_finite()),
                    Just(f64::NAN),
                ],
                1..20,
            )
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("d.csv");
            let mut store = DrawStore::new(
                (0..values.len()).map(|i| format!("c{i}")).collect(),
            );
            store.rows.push(DrawRow { chain: 0, iteration: 1, values });
            store.sources = vec!["chain0".into()];
            write_draws_csv(&path, &store).unwrap();
            let back = read_draws_csv(&path).unwrap();
            prop_assert!(store.bit_identical(&back));
        }
    }
}
