//! Retained posterior draws in a flat, columnar layout.

use nalgebra::DMatrix;

use crate::data::Dimensions;
use crate::error::{Error, Result};
use crate::estimands::estimand_labels;

/// One retained sweep: which chain produced it, the global sweep index it was
/// recorded at, and the values for every column in [`DrawStore::columns`].
#[derive(Debug, Clone, PartialEq)]
pub struct DrawRow {
    pub chain: u32,
    pub iteration: u64,
    pub values: Vec<f64>,
}

/// Column labels for a fit's draws: every estimand, then the population mean
/// coordinates `mu_1..mu_d`, then the upper triangle of the population
/// covariance `sigma_i_j` (row-major, 1-based, i <= j).
pub fn draw_columns(dims: &Dimensions) -> Vec<String> {
    let d = dims.omega_dim();
    let mut cols = estimand_labels(dims);
    for i in 1..=d {
        cols.push(format!("mu_{i}"));
    }
    for i in 1..=d {
        for j in i..=d {
            cols.push(format!("sigma_{i}_{j}"));
        }
    }
    cols
}

/// Flat store of retained draws, possibly pooled across chains and fits.
/// `sources` labels each chain id (fit provenance survives pooling).
#[derive(Debug, Clone, PartialEq)]
pub struct DrawStore {
    pub columns: Vec<String>,
    pub rows: Vec<DrawRow>,
    pub sources: Vec<String>,
}

impl DrawStore {
    pub fn new(columns: Vec<String>) -> Self {
        DrawStore { columns, rows: Vec::new(), sources: Vec::new() }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All draws of one column, in row order.
    pub fn column_values(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::data(format!("no draw column named {name}")))?;
        Ok(self.rows.iter().map(|r| r.values[idx]).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Reconstruct the symmetric covariance draw from each row's triangle.
    /// `d` is the omega dimension.
    pub fn sigma_draws(&self, d: usize) -> Result<Vec<DMatrix<f64>>> {
        let mut index = Vec::with_capacity(d * (d + 1) / 2);
        for i in 1..=d {
            for j in i..=d {
                let name = format!("sigma_{i}_{j}");
                index.push(self.column_index(&name).ok_or_else(|| {
                    Error::data(format!("draw store is missing column {name}"))
                })?);
            }
        }
        let mut out = Vec::with_capacity(self.rows.len());
        for row in &self.rows {
            let mut s = DMatrix::zeros(d, d);
            let mut k = 0;
            for i in 0..d {
                for j in i..d {
                    let v = row.values[index[k]];
                    s[(i, j)] = v;
                    s[(j, i)] = v;
                    k += 1;
                }
            }
            out.push(s);
        }
        Ok(out)
    }

    /// Exact equality including NaN-equals-NaN, for reproducibility checks.
    pub fn bit_identical(&self, other: &DrawStore) -> bool {
        self.columns == other.columns
            && self.rows.len() == other.rows.len()
            && self.rows.iter().zip(&other.rows).all(|(a, b)| {
                a.chain == b.chain
                    && a.iteration == b.iteration
                    && a.values.len() == b.values.len()
                    && a.values
                        .iter()
                        .zip(&b.values)
                        .all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }
}
