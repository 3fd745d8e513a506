//! Product-space relatedness analysis of export specializations.
//!
//! Pipeline: export panel ingest, RCA indicators and transitions, proximity
//! and density, complexity indices and outlook indicators, density
//! decomposition, logit models of gains and losses, and smoothed
//! country-level summaries.

pub mod complexity;
pub mod decomposition;
pub mod econometrics;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod product_space;
pub mod report;
pub mod smoothing;
pub mod specialization;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
