//! Seeded Monte Carlo studies over random trigonometric regression problems.

pub mod config;
pub mod generate;
pub mod runners;
pub mod table;

pub use config::{ExperimentConfig, ExperimentName};
pub use runners::{oracle_gamma, run_experiment, ExperimentOutput, GammaScorer, Summary};
pub use table::{summarize, RecordTable, SummaryStats};
