//! Experiment harness around the `qpnn` simulator: seeded grids of training
//! trials, a resumable JSON result store, statistical post-processing and
//! CSV tables.

pub mod config;
pub mod error;
pub mod experiment;
pub mod stats;
pub mod store;
pub mod summary;

pub use config::{parse_angle, Cell, ExperimentConfig};
pub use error::{LabError, Result};
pub use experiment::{run_experiment, RunOptions};
pub use store::{RecordKind, Store, TrialRecord};
pub use summary::{summarize, CellStats, Summary, SummaryRow};
