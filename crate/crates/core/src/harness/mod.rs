//! Experiment orchestration: configuration, the stepsize sweep, and CSV output.

pub mod config;
pub mod experiment;
pub mod output;

use std::path::{Path, PathBuf};

pub use config::{Algorithm, ExperimentConfig, GridConfig, MuRule, ProblemConfig, RunConfig, Spacing, StepRule};
pub use experiment::{
    best_over_grid, build_instance, instance_for, mean_curves, median, median_best_final_gap, run_experiment,
    BestPoint, ExperimentResult, Instance, MeanCurve, RunFailure, RunRecord, StationaritySummary,
};
pub use output::{write_outputs, SavedTrace};

/// Environment variable that overrides every other output directory setting.
pub const OUTPUT_DIR_ENV: &str = "EMAOPT_OUTPUT_DIR";

pub const DEFAULT_OUTPUT_DIR: &str = "results";

/// Output directory: the environment override, then the CLI flag, then the
/// config file, then `results/`.
pub fn resolve_output_dir(env_value: Option<&str>, flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    if let Some(dir) = env_value.filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    config
        .run
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}
