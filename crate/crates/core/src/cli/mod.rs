//! Experiment runner: JSON configs in, per-seed round CSVs, summaries,
//! sweeps and SVG learning curves out.

mod config;
mod report;
mod run;

pub use config::{DatasetSpec, ExperimentConfig, IdxFiles};
pub use report::{
    cmd_report, load_series, render_svg, Series, SeriesPoint, MARGIN_BOTTOM, MARGIN_LEFT,
    MARGIN_RIGHT, MARGIN_TOP, PLOT_HEIGHT, PLOT_WIDTH,
};
pub use run::{cmd_run, cmd_sweep, run_experiment, RunSummary, SweepAxis};

use crate::Error;

/// A command failure, split by whether it happened while reading the
/// configuration or while running.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(Error),
    #[error("runtime error: {0}")]
    Runtime(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn error(&self) -> &Error {
        match self {
            Failure::Config(e) | Failure::Runtime(e) => e,
        }
    }
}
