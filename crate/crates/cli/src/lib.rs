//! Experiment driver for the SymNMF solvers: matrix ingestion, configuration,
//! multi-restart runs of every solver from shared initializations, trace CSVs,
//! summaries and certificates.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

pub use config::{Emit, ExperimentConfig, InputSpec, Overrides, SolverKind};
pub use error::{CliError, Result};
pub use experiment::{run_experiment, ExperimentReport, RunRecord, SolverSummary};
pub use io::{load_matrix, save_matrix};
