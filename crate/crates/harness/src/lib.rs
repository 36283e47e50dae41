//! Benchmark harness for feature-highlighting policies: calibrates a
//! Gaussian prior and a weighted loss on tabular data, runs every policy at
//! every bandwidth for naive and sophisticated receivers, and writes
//! reproducible CSV/JSON result tables.

pub mod calibrate;
pub mod config;
pub mod data;
pub mod error;
pub mod report;
pub mod sweep;

pub use calibrate::{calibrate, Calibration};
pub use config::{Evaluation, ExperimentConfig};
pub use data::{Dataset, SyntheticSpec};
pub use error::{HarnessError, Result};
pub use sweep::{run_sweep, ResultRow, ResultTable};
