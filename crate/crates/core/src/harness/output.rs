//! CSV files written by a sweep. Floats use Rust's shortest round-trip form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ProblemConfig};
use super::experiment::{best_over_grid, mean_curves, ExperimentResult, RunRecord};
use crate::error::{Error, Result};
use crate::numeric::Vector;

pub const RUNS_HEADER: &str =
    "algorithm,alpha,repetition,epoch,objective_gap,moreau_grad_norm_sq,tstar_index,seed";
pub const SUMMARY_HEADER: &str = "algorithm,alpha,mean_final_gap,mean_moreau_grad_norm_sq";
pub const BEST_HEADER: &str = "algorithm,epoch,best_mean_gap,best_alpha";
pub const STATIONARITY_HEADER: &str = "algorithm,alpha,repetition,tstar_index,\
zeta_identity,grad_norm_sq_identity,envelope_gap_identity,converged_identity,\
zeta_vhat,grad_norm_sq_vhat,envelope_gap_vhat,converged_vhat";
pub const FAILURES_HEADER: &str = "algorithm,alpha,repetition,message";

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const BEST_FILE: &str = "best_over_grid.csv";
pub const STATIONARITY_FILE: &str = "stationarity.csv";
pub const FAILURES_FILE: &str = "failures.csv";
pub const TRACES_DIR: &str = "traces";

fn float(v: f64) -> String {
    format!("{v:?}")
}

/// Per-epoch rows. The Moreau column is only filled on each run's final
/// epoch row, where it describes `x_{t*}`.
pub fn runs_csv(records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str(RUNS_HEADER);
    out.push('\n');
    for r in records {
        let last = r.gaps.len();
        for (i, gap) in r.gaps.iter().enumerate() {
            let epoch = i + 1;
            let moreau = if epoch == last {
                float(r.identity.grad_norm_sq)
            } else {
                String::new()
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.algorithm,
                float(r.alpha),
                r.repetition,
                epoch,
                float(*gap),
                moreau,
                r.tstar,
                r.seed
            );
        }
    }
    out
}

pub fn summary_csv(records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for c in mean_curves(records) {
        let final_gap = c.gaps.last().copied().unwrap_or(f64::NAN);
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.algorithm,
            float(c.alpha),
            float(final_gap),
            float(c.mean_grad_norm_sq)
        );
    }
    out
}

pub fn best_csv(records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str(BEST_HEADER);
    out.push('\n');
    for p in best_over_grid(records) {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.algorithm,
            p.epoch,
            float(p.mean_gap),
            float(p.alpha)
        );
    }
    out
}

pub fn stationarity_csv(records: &[RunRecord]) -> String {
    let mut out = String::new();
    out.push_str(STATIONARITY_HEADER);
    out.push('\n');
    for r in records {
        let (a, b) = (&r.identity, &r.adaptive);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.algorithm,
            float(r.alpha),
            r.repetition,
            r.tstar,
            float(a.zeta),
            float(a.grad_norm_sq),
            float(a.envelope_gap),
            a.converged,
            float(b.zeta),
            float(b.grad_norm_sq),
            float(b.envelope_gap),
            b.converged
        );
    }
    out
}

pub fn failures_csv(result: &ExperimentResult) -> String {
    let mut out = String::new();
    out.push_str(FAILURES_HEADER);
    out.push('\n');
    for f in &result.failures {
        let message = f.message.replace('"', "\"\"");
        let _ = writeln!(
            out,
            "{},{},{},\"{}\"",
            f.algorithm,
            float(f.alpha),
            f.repetition,
            message
        );
    }
    out
}

/// `x_{t*}` and `v̂_{t*}` of one run with enough context to rebuild its
/// problem instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedTrace {
    pub problem: ProblemConfig,
    pub master_seed: u64,
    pub repetition: usize,
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub tstar: usize,
    pub x_tstar: Vector,
    pub v_hat_tstar: Vector,
    pub gaps: Vec<f64>,
}

impl SavedTrace {
    pub fn from_record(result: &ExperimentResult, record: &RunRecord) -> Self {
        SavedTrace {
            problem: result.config.problem.clone(),
            master_seed: result.config.run.master_seed,
            repetition: record.repetition,
            algorithm: record.algorithm,
            alpha: record.alpha,
            tstar: record.tstar,
            x_tstar: record.x_tstar.clone(),
            v_hat_tstar: record.v_hat_tstar.clone(),
            gaps: record.gaps.clone(),
        }
    }

    pub fn file_name(&self, grid_index: usize) -> String {
        format!("{}_{grid_index}_{}.json", self.algorithm, self.repetition)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes all CSVs (and traces when enabled) into `dir`, returning the paths.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    if result.records.is_empty() && result.failures.is_empty() {
        return Err(Error::InvalidParameter("no results to write".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = vec![
        write(dir, RUNS_FILE, &runs_csv(&result.records))?,
        write(dir, SUMMARY_FILE, &summary_csv(&result.records))?,
        write(dir, BEST_FILE, &best_csv(&result.records))?,
        write(dir, STATIONARITY_FILE, &stationarity_csv(&result.records))?,
        write(dir, FAILURES_FILE, &failures_csv(result))?,
    ];
    if result.config.run.save_traces {
        let traces = dir.join(TRACES_DIR);
        std::fs::create_dir_all(&traces).map_err(|e| Error::io(&traces, e))?;
        for r in &result.records {
            let saved = SavedTrace::from_record(result, r);
            let path = traces.join(saved.file_name(r.grid_index));
            saved.save(&path)?;
            paths.push(path);
        }
    }
    Ok(paths)
}
