//! First-order (FEMA) and zeroth-order (ZEMA) adaptive EMA methods, their
//! SGD baselines, stepsize schedules, and randomized output selection.

mod runner;

use serde::{Deserialize, Serialize};

use crate::accumulators::{EmaConfig, Preset};
use crate::error::{Error, Result};
use crate::numeric::Vector;
use crate::problems::CompositeProblem;
use crate::rng::{RunId, StreamRng};

pub use runner::{
    Checkpoint, ObjectiveRecord, OracleCounts, RunTrace, Runner, SeedRecord, StoredIterate,
    TheoryAccumulators,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepsizeSchedule {
    /// `αₜ = α` for every `t`.
    Constant { alpha: f64 },
    /// `αₜ = α/√(T+1)` for every `t`.
    ConstantOverSqrtT { alpha: f64 },
    Explicit { steps: Vec<f64> },
}

impl StepsizeSchedule {
    /// The `T + 1` stepsizes `α₀..α_T`.
    pub fn materialize(&self, horizon: usize) -> Result<Vec<f64>> {
        let count = horizon
            .checked_add(1)
            .ok_or_else(|| Error::InvalidParameter("horizon too large".into()))?;
        let steps = match self {
            StepsizeSchedule::Constant { alpha } => vec![*alpha; count],
            StepsizeSchedule::ConstantOverSqrtT { alpha } => {
                vec![alpha / (count as f64).sqrt(); count]
            }
            StepsizeSchedule::Explicit { steps } => {
                if steps.len() != count {
                    return Err(Error::InvalidParameter(format!(
                        "explicit schedule has {} stepsizes but T + 1 = {count}",
                        steps.len()
                    )));
                }
                steps.clone()
            }
        };
        if let Some(t) = steps.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "stepsize at t = {t} must be positive and finite, got {}",
                steps[t]
            )));
        }
        Ok(steps)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleKind {
    FirstOrder,
    /// Two-point estimates with smoothing radius `mu`.
    ZerothOrder { mu: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep every k-th iterate (plus the last one). `None` keeps none.
    pub store_every: Option<usize>,
    /// Iterations between objective evaluations; defaults to one epoch.
    pub eval_every: Option<usize>,
    /// `v̂₋₁`; defaults to the problem metric, then to the mode's floor.
    pub initial_vhat: Option<Vector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub ema: EmaConfig,
    pub steps: StepsizeSchedule,
    /// `T`: the run performs iterations `t = 0..=T`.
    pub horizon: usize,
    pub oracle: OracleKind,
    #[serde(default)]
    pub options: RunOptions,
}

/// Where a run's random streams come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeed {
    pub master_seed: u64,
    pub run: RunId,
}

impl RunSeed {
    pub fn new(master_seed: u64) -> Self {
        RunSeed {
            master_seed,
            run: RunId::default(),
        }
    }
}

/// Default smoothing radius `μ = d/√(T+1)`.
pub fn default_mu(dim: usize, horizon: usize) -> f64 {
    dim as f64 / ((horizon as f64) + 1.0).sqrt()
}

/// Index `t` drawn with probability `αₜ/Σαₛ` by inverse CDF.
pub fn select_tstar(stepsizes: &[f64], rng: &mut StreamRng) -> Result<usize> {
    if stepsizes.is_empty() {
        return Err(Error::InvalidParameter("t* selection needs at least one stepsize".into()));
    }
    if let Some(t) = stepsizes.iter().position(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "stepsize at t = {t} must be positive, got {}",
            stepsizes[t]
        )));
    }
    let mut cumulative = Vec::with_capacity(stepsizes.len());
    let mut total = 0.0;
    for a in stepsizes {
        total += a;
        cumulative.push(total);
    }
    let target = rng.uniform() * total;
    let index = cumulative.partition_point(|&c| c <= target);
    Ok(index.min(stepsizes.len() - 1))
}

pub fn run<P: CompositeProblem + ?Sized>(
    problem: &P,
    config: OptimizerConfig,
    x0: Vector,
    seed: RunSeed,
) -> Result<RunTrace> {
    Runner::new(problem, config, x0, seed)?.run_to_end()
}

/// Algorithm 1 with default run options.
pub fn fema_run<P: CompositeProblem + ?Sized>(
    problem: &P,
    ema: EmaConfig,
    steps: StepsizeSchedule,
    horizon: usize,
    x0: Vector,
    seed: RunSeed,
) -> Result<RunTrace> {
    let config = OptimizerConfig {
        ema,
        steps,
        horizon,
        oracle: OracleKind::FirstOrder,
        options: RunOptions::default(),
    };
    run(problem, config, x0, seed)
}

/// Algorithm 2; `mu = None` uses `d/√(T+1)`.
pub fn zema_run<P: CompositeProblem + ?Sized>(
    problem: &P,
    ema: EmaConfig,
    steps: StepsizeSchedule,
    horizon: usize,
    x0: Vector,
    mu: Option<f64>,
    seed: RunSeed,
) -> Result<RunTrace> {
    let mu = mu.unwrap_or_else(|| default_mu(problem.dim(), horizon));
    let config = OptimizerConfig {
        ema,
        steps,
        horizon,
        oracle: OracleKind::ZerothOrder { mu },
        options: RunOptions::default(),
    };
    run(problem, config, x0, seed)
}

pub fn sgd_baseline_run<P: CompositeProblem + ?Sized>(
    problem: &P,
    steps: StepsizeSchedule,
    horizon: usize,
    x0: Vector,
    seed: RunSeed,
) -> Result<RunTrace> {
    fema_run(problem, sgd_config(), steps, horizon, x0, seed)
}

pub fn zsgd_baseline_run<P: CompositeProblem + ?Sized>(
    problem: &P,
    steps: StepsizeSchedule,
    horizon: usize,
    x0: Vector,
    mu: Option<f64>,
    seed: RunSeed,
) -> Result<RunTrace> {
    zema_run(problem, sgd_config(), steps, horizon, x0, mu, seed)
}

fn sgd_config() -> EmaConfig {
    Preset::Sgd.config()
}
