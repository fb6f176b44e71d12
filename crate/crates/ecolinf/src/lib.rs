//! Hybrid ecological + survey inference for R x C voting tables.
//!
//! The library fits a hierarchical count model to precinct-level voting data:
//! each precinct has known row margins (race counts among the voting-age
//! population) and column margins (votes per choice, with a final "Abstain"
//! column), while the internal race-by-choice cell counts are unobserved.
//! Where an in-precinct survey sampled individual voters, the surveyed counts
//! enter as a known sub-table of the latent cells and sharpen the posterior.
//!
//! The main entry points are:
//! - [`data`]: table/survey containers, validation, precinct aggregation;
//! - [`logit`]: the additive log-ratio transform between cell probabilities
//!   and the unconstrained scale the hierarchy lives on;
//! - [`sampler`]: the three-block Gibbs sampler over cells, per-unit logits,
//!   and hyperparameters, plus the draw store it emits;
//! - [`estimands`]: jurisdiction-level support/composition/turnout summaries;
//! - [`simgen`]: synthetic jurisdictions with known ground truth;
//! - [`survey`]: the design-based ratio estimator used as a baseline;
//! - [`harness`]: the replicated estimator-comparison experiment.

pub use nalgebra;

pub mod data;
pub mod error;
pub mod estimands;
pub mod harness;
pub mod io;
pub mod logit;
pub mod mathutil;
pub mod rngstream;
pub mod sampler;
pub mod simgen;
pub mod survey;

pub use error::{Error, Result};
