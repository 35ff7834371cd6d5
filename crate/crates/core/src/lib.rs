pub mod cli;
pub mod error;
pub mod evaluation;
pub mod fairness;
pub mod features;
pub mod ingest;
pub mod mitigation;
pub mod models;
pub mod phenotype;
pub mod report;
pub mod seed;
pub mod synth;
pub mod windowing;

pub use error::{Error, Result};
