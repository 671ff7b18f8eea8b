//! Sweep over (algorithm, stepsize, repetition), one independent run each.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, ProblemConfig, StepRule};
use crate::error::{Error, Result};
use crate::moreau::{default_zeta, moreau_gradient, ProxPointOptions, StationarityReport};
use crate::numeric::{DiagonalMetric, Vector};
use crate::optimizers::{OptimizerConfig, OracleKind, RunOptions, RunSeed, Runner, StepsizeSchedule};
use crate::problems::generate_with;
use crate::problems::{make_test_quadratic, CompositeProblem, PhaseRetrieval};
use crate::rng::{Purpose, RunId, StreamKey, StreamRng};
use crate::zoo::sample_direction;

/// `ζ` used for convex problems, where any positive value is admissible.
pub const CONVEX_ZETA: f64 = 1.0;

/// One repetition's instance and starting point, shared by every algorithm
/// and stepsize so comparisons are paired.
pub struct Instance {
    pub problem: Arc<dyn CompositeProblem>,
    pub phase_retrieval: Option<Arc<PhaseRetrieval>>,
    pub x0: Vector,
}

fn shared_run(repetition: usize) -> RunId {
    RunId {
        algorithm: 0,
        grid_index: 0,
        repetition: repetition as u16,
    }
}

pub fn build_instance(config: &ExperimentConfig, repetition: usize) -> Result<Instance> {
    instance_for(&config.problem, config.run.master_seed, repetition)
}

/// Instance and starting point of `repetition` under `master` seed.
pub fn instance_for(problem: &ProblemConfig, master: u64, repetition: usize) -> Result<Instance> {
    let run = shared_run(repetition);
    let mut init = StreamRng::new(StreamKey::new(master, run, Purpose::Init));
    match problem {
        ProblemConfig::PhaseRetrieval { d, n, regularizer } => {
            let mut data = StreamRng::new(StreamKey::new(master, run, Purpose::Data));
            let seed = data.key().stream_id() ^ master;
            let problem = Arc::new(generate_with(*d, *n, seed, &mut data)?.with_regularizer(regularizer.clone()));
            let x0 = sample_direction(*d, &mut init)?;
            Ok(Instance {
                problem: problem.clone(),
                phase_retrieval: Some(problem),
                x0,
            })
        }
        ProblemConfig::Quadratic {
            spectrum,
            linear,
            noise,
            epoch_length,
            regularizer,
        } => {
            let problem = make_test_quadratic(Vector::new(spectrum.clone())?, Vector::new(linear.clone())?)?
                .with_noise(*noise)?
                .with_epoch_length(*epoch_length)?
                .with_regularizer(regularizer.clone());
            let x0 = sample_direction(spectrum.len(), &mut init)?;
            Ok(Instance {
                problem: Arc::new(problem),
                phase_retrieval: None,
                x0,
            })
        }
    }
}

/// Result of one successful run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: Algorithm,
    pub grid_index: usize,
    pub alpha: f64,
    pub repetition: usize,
    /// Objective gap `ψ(x) − ψ*` at the end of epochs `1..=E`.
    pub gaps: Vec<f64>,
    pub tstar: usize,
    /// Stream id of the sample stream.
    pub seed: u64,
    /// Envelope report at `x_{t*}` in the identity metric.
    pub identity: StationaritySummary,
    /// Envelope report at `x_{t*}` in the metric `V̂_{t*}^{1/2}`.
    pub adaptive: StationaritySummary,
    pub x_tstar: Vector,
    pub v_hat_tstar: Vector,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaritySummary {
    pub zeta: f64,
    pub grad_norm_sq: f64,
    /// `ψ_ζ(x) − ψ*`
    pub envelope_gap: f64,
    pub converged: bool,
}

impl StationaritySummary {
    fn from_report(report: &StationarityReport, optimum: f64) -> Self {
        StationaritySummary {
            zeta: report.zeta,
            grad_norm_sq: report.grad_norm_sq,
            envelope_gap: report.envelope_value - optimum,
            converged: report.converged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub algorithm: Algorithm,
    pub grid_index: usize,
    pub alpha: f64,
    pub repetition: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

#[derive(Clone, Copy, Debug)]
struct Job {
    algorithm: Algorithm,
    grid_index: usize,
    alpha: f64,
    repetition: usize,
}

/// Ordering of rows in every output: algorithm, stepsize, repetition.
fn job_key(algorithm: Algorithm, alpha: f64, repetition: usize) -> (Algorithm, u64, usize) {
    (algorithm, alpha.to_bits(), repetition)
}

pub fn optimizer_config(config: &ExperimentConfig, algorithm: Algorithm, alpha: f64) -> OptimizerConfig {
    let steps = match config.run.step_rule {
        StepRule::Constant => StepsizeSchedule::Constant { alpha },
        StepRule::ConstantOverSqrtT => StepsizeSchedule::ConstantOverSqrtT { alpha },
    };
    let oracle = if algorithm.is_zeroth_order() {
        OracleKind::ZerothOrder { mu: config.mu() }
    } else {
        OracleKind::FirstOrder
    };
    OptimizerConfig {
        ema: algorithm.ema(),
        steps,
        horizon: config.horizon(),
        oracle,
        options: RunOptions {
            store_every: None,
            eval_every: Some(config.epoch_length()),
            initial_vhat: config
                .run
                .initial_vhat
                .map(|q| Vector::filled(config.dim(), q).expect("validated")),
        },
    }
}

pub fn run_seed(config: &ExperimentConfig, algorithm: Algorithm, grid_index: usize, repetition: usize) -> RunSeed {
    RunSeed {
        master_seed: config.run.master_seed,
        run: RunId {
            algorithm: algorithm.code(),
            grid_index: grid_index as u16,
            repetition: repetition as u16,
        },
    }
}

/// Identity-metric `ζ`: `1/(2ρ)` for weakly convex problems, else [`CONVEX_ZETA`].
pub fn reporting_zeta(problem: &dyn CompositeProblem, metric: &DiagonalMetric) -> f64 {
    default_zeta(problem, metric).unwrap_or(CONVEX_ZETA)
}

fn execute(config: &ExperimentConfig, instance: &Instance, job: Job) -> Result<RunRecord> {
    let problem: &dyn CompositeProblem = instance.problem.as_ref();
    let opt = optimizer_config(config, job.algorithm, job.alpha);
    let seed = run_seed(config, job.algorithm, job.grid_index, job.repetition);
    let trace = Runner::new(problem, opt, instance.x0.clone(), seed)?.run_to_end()?;
    let optimum = problem.optimal_value().unwrap_or(0.0);
    let gaps: Vec<f64> = trace
        .objective_estimates
        .iter()
        .map(|r| r.value - optimum)
        .collect();
    if gaps.len() != config.run.epochs {
        return Err(Error::Precondition(format!(
            "expected {} epoch evaluations, got {}",
            config.run.epochs,
            gaps.len()
        )));
    }
    let options = ProxPointOptions {
        max_iter: config.run.moreau_max_iter,
        ..ProxPointOptions::default()
    };
    let identity_metric = DiagonalMetric::identity(problem.dim());
    let zeta = reporting_zeta(problem, &identity_metric);
    let identity = moreau_gradient(problem, &trace.x_tstar, zeta, &identity_metric, &options)?;
    let adaptive_metric = DiagonalMetric::new(trace.v_hat_tstar.clone())?.sqrt();
    let adaptive_zeta = reporting_zeta(problem, &adaptive_metric);
    let adaptive = moreau_gradient(problem, &trace.x_tstar, adaptive_zeta, &adaptive_metric, &options)?;
    Ok(RunRecord {
        algorithm: job.algorithm,
        grid_index: job.grid_index,
        alpha: job.alpha,
        repetition: job.repetition,
        gaps,
        tstar: trace.selected_tstar,
        seed: trace.seeds.xi_stream,
        identity: StationaritySummary::from_report(&identity, optimum),
        adaptive: StationaritySummary::from_report(&adaptive, optimum),
        x_tstar: trace.x_tstar,
        v_hat_tstar: trace.v_hat_tstar,
    })
}

/// Runs every (algorithm, stepsize, repetition) of the sweep. Individual run
/// failures are collected, not propagated.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let instances = (0..config.run.repetitions)
        .map(|r| build_instance(config, r))
        .collect::<Result<Vec<_>>>()?;
    let alphas = config.grid.points();
    let mut jobs = Vec::new();
    for &algorithm in &config.algorithms {
        for (grid_index, &alpha) in alphas.iter().enumerate() {
            for repetition in 0..config.run.repetitions {
                jobs.push(Job {
                    algorithm,
                    grid_index,
                    alpha,
                    repetition,
                });
            }
        }
    }
    log::info!("running {} jobs", jobs.len());
    let outcomes: Vec<std::result::Result<RunRecord, RunFailure>> = jobs
        .par_iter()
        .map(|job| {
            execute(config, &instances[job.repetition], *job).map_err(|e| {
                log::warn!(
                    "{} alpha={} repetition={} failed: {e}",
                    job.algorithm,
                    job.alpha,
                    job.repetition
                );
                RunFailure {
                    algorithm: job.algorithm,
                    grid_index: job.grid_index,
                    alpha: job.alpha,
                    repetition: job.repetition,
                    message: e.to_string(),
                }
            })
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    records.sort_by_key(|r| job_key(r.algorithm, r.alpha, r.repetition));
    failures.sort_by_key(|f| job_key(f.algorithm, f.alpha, f.repetition));
    Ok(ExperimentResult {
        config: config.clone(),
        records,
        failures,
    })
}

/// Repetition-mean gap curve of one (algorithm, stepsize) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanCurve {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub repetitions: usize,
    pub gaps: Vec<f64>,
    pub mean_grad_norm_sq: f64,
}

pub fn mean_curves(records: &[RunRecord]) -> Vec<MeanCurve> {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by_key(|r| job_key(r.algorithm, r.alpha, r.repetition));
    let mut curves: Vec<MeanCurve> = Vec::new();
    for r in sorted {
        match curves.last_mut() {
            Some(c) if c.algorithm == r.algorithm && c.alpha.to_bits() == r.alpha.to_bits() => {
                for (acc, g) in c.gaps.iter_mut().zip(&r.gaps) {
                    *acc += g;
                }
                c.mean_grad_norm_sq += r.identity.grad_norm_sq;
                c.repetitions += 1;
            }
            _ => curves.push(MeanCurve {
                algorithm: r.algorithm,
                alpha: r.alpha,
                repetitions: 1,
                gaps: r.gaps.clone(),
                mean_grad_norm_sq: r.identity.grad_norm_sq,
            }),
        }
    }
    for c in &mut curves {
        let k = c.repetitions as f64;
        c.gaps.iter_mut().for_each(|g| *g /= k);
        c.mean_grad_norm_sq /= k;
    }
    curves
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestPoint {
    pub algorithm: Algorithm,
    /// 1-based epoch.
    pub epoch: usize,
    pub mean_gap: f64,
    pub alpha: f64,
}

/// Pointwise-in-epoch minimum over stepsizes of the repetition-mean curves.
/// Ties go to the smaller stepsize, so the result does not depend on the
/// order of `records`.
pub fn best_over_grid(records: &[RunRecord]) -> Vec<BestPoint> {
    let curves = mean_curves(records);
    let mut out: Vec<BestPoint> = Vec::new();
    let mut start = 0;
    while start < curves.len() {
        let algorithm = curves[start].algorithm;
        let end = start + curves[start..].iter().take_while(|c| c.algorithm == algorithm).count();
        let group = &curves[start..end];
        let epochs = group.iter().map(|c| c.gaps.len()).min().unwrap_or(0);
        for e in 0..epochs {
            let best = group
                .iter()
                .min_by(|a, b| a.gaps[e].total_cmp(&b.gaps[e]).then(a.alpha.total_cmp(&b.alpha)))
                .expect("group is nonempty");
            out.push(BestPoint {
                algorithm,
                epoch: e + 1,
                mean_gap: best.gaps[e],
                alpha: best.alpha,
            });
        }
        start = end;
    }
    out
}

/// Median over repetitions of each repetition's best final gap over the grid.
pub fn median_best_final_gap(records: &[RunRecord], algorithm: Algorithm) -> Option<f64> {
    let mut per_rep: Vec<(usize, f64)> = Vec::new();
    for r in records.iter().filter(|r| r.algorithm == algorithm) {
        let last = *r.gaps.last()?;
        match per_rep.iter_mut().find(|(rep, _)| *rep == r.repetition) {
            Some((_, best)) => *best = best.min(last),
            None => per_rep.push((r.repetition, last)),
        }
    }
    median(per_rep.into_iter().map(|(_, g)| g).collect())
}

pub fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let k = values.len();
    Some(if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    })
}
