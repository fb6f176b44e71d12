//! Core data containers: table dimensions, per-unit margins, survey counts,
//! precinct-to-location aggregation, and dataset validation.
//!
//! A "unit" is whatever geography one observation row describes — a precinct
//! in raw data, a polling location after aggregation. Every unit carries its
//! row margins (population count per race) and column margins (votes per
//! choice). The final choice column is always the reference "Abstain" column,
//! so row and column margins account for the same people and must sum to the
//! same total.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label of the mandatory reference column. Always stored last.
pub const ABSTAIN: &str = "Abstain";

/// Race and choice labels defining the table shape. Choices always end with
/// [`ABSTAIN`]; ingestion reorders columns when an input file lists it
/// elsewhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimensions {
    races: Vec<String>,
    choices: Vec<String>,
}

impl Dimensions {
    /// Validates shape and labels. `choices` must contain [`ABSTAIN`]; it is
    /// moved to the last position if given elsewhere.
    pub fn new(races: Vec<String>, mut choices: Vec<String>) -> Result<Self> {
        if races.len() < 2 {
            return Err(Error::config("need at least two races"));
        }
        if choices.len() < 2 {
            return Err(Error::config("need at least two choices (including Abstain)"));
        }
        let labels_ok = |v: &[String]| {
            let mut seen = HashSet::new();
            v.iter().all(|s| !s.is_empty() && seen.insert(s.clone()))
        };
        if !labels_ok(&races) {
            return Err(Error::config("race labels must be unique and non-empty"));
        }
        if !labels_ok(&choices) {
            return Err(Error::config("choice labels must be unique and non-empty"));
        }
        match choices.iter().position(|c| c == ABSTAIN) {
            Some(pos) => {
                let a = choices.remove(pos);
                choices.push(a);
            }
            None => {
                return Err(Error::config(format!(
                    "choices must include the reference column \"{ABSTAIN}\""
                )))
            }
        }
        Ok(Dimensions { races, choices })
    }

    pub fn races(&self) -> &[String] {
        &self.races
    }

    pub fn choices(&self) -> &[String] {
        &self.choices
    }

    pub fn n_races(&self) -> usize {
        self.races.len()
    }

    pub fn n_choices(&self) -> usize {
        self.choices.len()
    }

    /// Number of cells per unit table.
    pub fn n_cells(&self) -> usize {
        self.races.len() * self.choices.len()
    }

    /// Index of the Abstain column (always the last).
    pub fn abstain_col(&self) -> usize {
        self.choices.len() - 1
    }

    /// Dimension of the unconstrained logit vector: R * (C - 1).
    pub fn omega_dim(&self) -> usize {
        self.races.len() * (self.choices.len() - 1)
    }

    /// Flat row-major cell index.
    #[inline]
    pub fn cell(&self, race: usize, choice: usize) -> usize {
        race * self.choices.len() + choice
    }

    /// Flat index into the logit vector (race-major over non-Abstain choices).
    #[inline]
    pub fn omega_coord(&self, race: usize, choice: usize) -> usize {
        debug_assert!(choice < self.abstain_col());
        race * (self.choices.len() - 1) + choice
    }

    pub fn race_index(&self, label: &str) -> Option<usize> {
        self.races.iter().position(|r| r == label)
    }

    pub fn choice_index(&self, label: &str) -> Option<usize> {
        self.choices.iter().position(|c| c == label)
    }
}

/// Observed margins for one unit: `row_totals[r]` people of race r,
/// `col_totals[c]` votes for choice c (Abstain last). Both must sum to the
/// same population total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EcologicalTable {
    pub unit_id: String,
    pub row_totals: Vec<i64>,
    pub col_totals: Vec<i64>,
}

impl EcologicalTable {
    pub fn total(&self) -> i64 {
        self.row_totals.iter().sum()
    }
}

/// Surveyed cell counts for one in-sample unit, flattened row-major to match
/// [`Dimensions::cell`]. Units without a survey simply have no entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyCounts {
    pub unit_id: String,
    pub counts: Vec<i64>,
}

impl SurveyCounts {
    pub fn total(&self) -> i64 {
        self.counts.iter().sum()
    }

    pub fn row_total(&self, dims: &Dimensions, race: usize) -> i64 {
        (0..dims.n_choices()).map(|c| self.counts[dims.cell(race, c)]).sum()
    }

    pub fn col_total(&self, dims: &Dimensions, choice: usize) -> i64 {
        (0..dims.n_races()).map(|r| self.counts[dims.cell(r, choice)]).sum()
    }
}

/// Total map from precinct id to polling-location id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregationMap {
    entries: BTreeMap<String, String>,
}

impl AggregationMap {
    pub fn new(entries: BTreeMap<String, String>) -> Self {
        AggregationMap { entries }
    }

    pub fn insert(&mut self, precinct: impl Into<String>, location: impl Into<String>) {
        self.entries.insert(precinct.into(), location.into());
    }

    pub fn location_of(&self, precinct: &str) -> Option<&str> {
        self.entries.get(precinct).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// A full analysis input: dimensions, one table per unit, and surveys for the
/// in-sample subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dims: Dimensions,
    pub tables: Vec<EcologicalTable>,
    pub surveys: Vec<SurveyCounts>,
}

impl Dataset {
    pub fn new(dims: Dimensions, tables: Vec<EcologicalTable>, surveys: Vec<SurveyCounts>) -> Self {
        Dataset { dims, tables, surveys }
    }

    /// Unit ids that carry a survey (the in-sample set).
    pub fn in_sample_ids(&self) -> HashSet<&str> {
        self.surveys.iter().map(|s| s.unit_id.as_str()).collect()
    }

    pub fn survey_for(&self, unit_id: &str) -> Option<&SurveyCounts> {
        self.surveys.iter().find(|s| s.unit_id == unit_id)
    }

    pub fn table_for(&self, unit_id: &str) -> Option<&EcologicalTable> {
        self.tables.iter().find(|t| t.unit_id == unit_id)
    }
}

/// One validation failure, tagged with the offending unit where applicable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub unit_id: Option<String>,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.unit_id {
            Some(u) => write!(f, "unit {u}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// Outcome of [`validate_dataset`]: hard violations plus advisory warnings
/// (currently only zero-population units, which the sampler drops).
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Collapse violations into one `Error::Data` (or Ok if clean).
    pub fn into_result(self) -> Result<Vec<String>> {
        if self.violations.is_empty() {
            Ok(self.warnings)
        } else {
            let mut msg = String::from("dataset failed validation:");
            for v in self.violations.iter().take(20) {
                msg.push_str("\n  - ");
                msg.push_str(&v.to_string());
            }
            if self.violations.len() > 20 {
                msg.push_str(&format!("\n  ... and {} more", self.violations.len() - 20));
            }
            Err(Error::Data(msg))
        }
    }
}

fn check_table(dims: &Dimensions, t: &EcologicalTable, out: &mut ValidationReport) {
    let mut push = |msg: String| {
        out.violations.push(Violation { unit_id: Some(t.unit_id.clone()), message: msg });
    };
    if t.row_totals.len() != dims.n_races() {
        push(format!(
            "expected {} row totals, found {}",
            dims.n_races(),
            t.row_totals.len()
        ));
        return;
    }
    if t.col_totals.len() != dims.n_choices() {
        push(format!(
            "expected {} column totals, found {}",
            dims.n_choices(),
            t.col_totals.len()
        ));
        return;
    }
    if let Some(&bad) = t.row_totals.iter().find(|&&x| x < 0) {
        push(format!("negative row total {bad}"));
    }
    if let Some(&bad) = t.col_totals.iter().find(|&&x| x < 0) {
        push(format!("negative column total {bad}"));
    }
    let rs: i64 = t.row_totals.iter().sum();
    let cs: i64 = t.col_totals.iter().sum();
    if rs != cs {
        push(format!("row totals sum to {rs} but column totals sum to {cs}"));
    }
}

fn check_survey(
    dims: &Dimensions,
    s: &SurveyCounts,
    table: Option<&EcologicalTable>,
    out: &mut ValidationReport,
) {
    let mut push = |msg: String| {
        out.violations.push(Violation { unit_id: Some(s.unit_id.clone()), message: msg });
    };
    if s.counts.len() != dims.n_cells() {
        push(format!(
            "expected {} survey cells, found {}",
            dims.n_cells(),
            s.counts.len()
        ));
        return;
    }
    if let Some(&bad) = s.counts.iter().find(|&&x| x < 0) {
        push(format!("negative survey count {bad}"));
    }
    let table = match table {
        Some(t) => t,
        None => {
            push("survey references a unit with no ecological table".into());
            return;
        }
    };
    if table.row_totals.len() != dims.n_races() || table.col_totals.len() != dims.n_choices() {
        return; // table structurally broken; already reported
    }
    for r in 0..dims.n_races() {
        let kr = s.row_total(dims, r);
        if kr > table.row_totals[r] {
            push(format!(
                "surveyed {} people of race {} but the unit only has {}",
                kr,
                dims.races()[r],
                table.row_totals[r]
            ));
        }
    }
    for c in 0..dims.n_choices() {
        let kc = s.col_total(dims, c);
        if kc > table.col_totals[c] {
            push(format!(
                "surveyed {} votes for {} but the unit margin is only {}",
                kc,
                dims.choices()[c],
                table.col_totals[c]
            ));
        }
    }
}

/// Check structural integrity of a dataset: shapes, non-negativity, matching
/// row/column margin totals, unique unit ids, surveys nested inside their
/// unit's margins. Does not mutate; callers decide what to do with warnings.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut out = ValidationReport::default();
    let mut seen = HashSet::new();
    for t in &d.tables {
        if !seen.insert(t.unit_id.as_str()) {
            out.violations.push(Violation {
                unit_id: Some(t.unit_id.clone()),
                message: "duplicate unit id".into(),
            });
        }
        check_table(&d.dims, t, &mut out);
        if t.row_totals.iter().all(|&x| x == 0) && t.row_totals.len() == d.dims.n_races() {
            out.warnings
                .push(format!("unit {}: zero population; dropped at fit time", t.unit_id));
        }
    }
    let by_id: HashMap<&str, &EcologicalTable> =
        d.tables.iter().map(|t| (t.unit_id.as_str(), t)).collect();
    let mut seen_s = HashSet::new();
    for s in &d.surveys {
        if !seen_s.insert(s.unit_id.as_str()) {
            out.violations.push(Violation {
                unit_id: Some(s.unit_id.clone()),
                message: "duplicate survey for unit".into(),
            });
            continue;
        }
        check_survey(&d.dims, s, by_id.get(s.unit_id.as_str()).copied(), &mut out);
    }
    out
}

/// Which precincts to merge into their polling location.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationScope {
    /// Merge every precinct according to the map.
    All,
    /// Merge only locations containing at least one surveyed precinct;
    /// everything else stays at precinct level. This matches how shared
    /// polling places break the precinct attribution of in-person ballots:
    /// out-of-sample precincts keep their own margins.
    InSampleOnly,
}

/// Merge precincts into polling locations. The map must cover every unit in
/// the dataset. Surveys are re-keyed to the merged unit and summed when two
/// surveyed precincts share a location. Unit order follows first appearance
/// in the input.
pub fn aggregate_to_locations(
    d: &Dataset,
    map: &AggregationMap,
    scope: AggregationScope,
) -> Result<Dataset> {
    for t in &d.tables {
        if map.location_of(&t.unit_id).is_none() {
            return Err(Error::data(format!(
                "aggregation map has no entry for unit {}",
                t.unit_id
            )));
        }
    }
    let in_sample = d.in_sample_ids();
    // Locations that actually merge under this scope.
    let mut merged_locations: HashSet<&str> = HashSet::new();
    if matches!(scope, AggregationScope::InSampleOnly) {
        for s in &d.surveys {
            if let Some(loc) = map.location_of(&s.unit_id) {
                merged_locations.insert(loc);
            }
        }
    } else {
        for t in &d.tables {
            merged_locations.insert(map.location_of(&t.unit_id).unwrap());
        }
    }
    let _ = in_sample;

    let new_id = |unit: &str| -> String {
        let loc = map.location_of(unit).unwrap();
        if merged_locations.contains(loc) {
            loc.to_string()
        } else {
            unit.to_string()
        }
    };

    let mut order: Vec<String> = Vec::new();
    let mut tables: HashMap<String, EcologicalTable> = HashMap::new();
    for t in &d.tables {
        let id = new_id(&t.unit_id);
        match tables.get_mut(&id) {
            Some(acc) => {
                if acc.row_totals.len() != t.row_totals.len()
                    || acc.col_totals.len() != t.col_totals.len()
                {
                    return Err(Error::data(format!(
                        "cannot aggregate unit {}: shape mismatch",
                        t.unit_id
                    )));
                }
                for (a, b) in acc.row_totals.iter_mut().zip(&t.row_totals) {
                    *a += b;
                }
                for (a, b) in acc.col_totals.iter_mut().zip(&t.col_totals) {
                    *a += b;
                }
            }
            None => {
                order.push(id.clone());
                tables.insert(
                    id.clone(),
                    EcologicalTable {
                        unit_id: id,
                        row_totals: t.row_totals.clone(),
                        col_totals: t.col_totals.clone(),
                    },
                );
            }
        }
    }

    let mut survey_order: Vec<String> = Vec::new();
    let mut surveys: HashMap<String, SurveyCounts> = HashMap::new();
    for s in &d.surveys {
        let id = new_id(&s.unit_id);
        match surveys.get_mut(&id) {
            Some(acc) => {
                for (a, b) in acc.counts.iter_mut().zip(&s.counts) {
                    *a += b;
                }
            }
            None => {
                survey_order.push(id.clone());
                surveys.insert(id.clone(), SurveyCounts { unit_id: id, counts: s.counts.clone() });
            }
        }
    }

    Ok(Dataset {
        dims: d.dims.clone(),
        tables: order.into_iter().map(|id| tables.remove(&id).unwrap()).collect(),
        surveys: survey_order.into_iter().map(|id| surveys.remove(&id).unwrap()).collect(),
    })
}
