use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{select_tstar, OptimizerConfig, OracleKind, RunSeed};
use crate::accumulators::{AccumulatorMode, EmaState};
use crate::error::{check_dim, Error, Result};
use crate::numeric::Vector;
use crate::problems::CompositeProblem;
use crate::rng::{Purpose, StreamKey, StreamPosition, StreamRng};
use crate::zoo::{estimate_gradient_into, sample_direction_into};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredIterate {
    /// Number of completed iterations, so `x` is `x_t`.
    pub t: usize,
    pub x: Vector,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveRecord {
    /// Completed iterations when `ψ` was evaluated.
    pub iterations: usize,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleCounts {
    pub draws: u64,
    pub value_calls: u64,
    pub subgradient_calls: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRecord {
    pub master_seed: u64,
    pub xi_stream: u64,
    pub direction_stream: Option<u64>,
    pub tstar_stream: u64,
}

/// Running sums needed to evaluate the convergence bounds a posteriori.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TheoryAccumulators {
    pub sum_alpha: f64,
    pub sum_alpha_sq: f64,
    /// `Σ αₜ² Sₜ` with `Sₜ = Σ_{k≤t} τ^{t−k}‖g_k‖₁`; absent when `τ ≥ 1`.
    pub sum_alpha_sq_momentum: Option<f64>,
    /// `Σ β₁,ₜ² ‖v̂ₜ^{1/2}‖₁`
    pub sum_beta1_sq_vhat_sqrt_l1: f64,
    /// `‖v̂_T^{1/2}‖₁`
    pub final_vhat_sqrt_l1: f64,
    /// `Σ αₜ² ‖gₜ‖₁`
    pub sum_alpha_sq_grad_l1: f64,
    /// `Σ αₜ² ‖gₜ‖² / minᵢ (v̂ₜ^{1/2})ᵢ`
    pub sum_alpha_sq_grad_sq_over_min_vhat_sqrt: f64,
    pub max_grad_inf: f64,
    pub max_iterate_inf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub horizon: usize,
    pub stepsizes: Vec<f64>,
    pub iterates: Vec<StoredIterate>,
    pub initial_objective: f64,
    pub objective_estimates: Vec<ObjectiveRecord>,
    pub selected_tstar: usize,
    pub x_tstar: Vector,
    /// `v̂` after the update at iteration `t*`, the metric of the prox step
    /// that left `x_{t*}`.
    pub v_hat_tstar: Vector,
    pub final_x: Vector,
    pub final_state: EmaState,
    pub seeds: SeedRecord,
    pub counts: OracleCounts,
    pub theory: TheoryAccumulators,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Progress {
    t: usize,
    x: Vector,
    ema: EmaState,
    xi_position: StreamPosition,
    direction_position: Option<StreamPosition>,
    iterates: Vec<StoredIterate>,
    initial_objective: f64,
    objective_estimates: Vec<ObjectiveRecord>,
    x_tstar: Option<Vector>,
    v_hat_tstar: Option<Vector>,
    counts: OracleCounts,
    theory: TheoryAccumulators,
    momentum_running: f64,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: OptimizerConfig,
    pub seed: RunSeed,
    pub tstar: usize,
    progress: Progress,
}

impl Checkpoint {
    pub fn iteration(&self) -> usize {
        self.progress.t
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("checkpoint: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Checkpoint::from_json(&text)
    }
}

/// A single optimizer run advanced one iteration at a time.
pub struct Runner<'p, P: CompositeProblem + ?Sized> {
    problem: &'p P,
    config: OptimizerConfig,
    seed: RunSeed,
    steps: Vec<f64>,
    tstar: usize,
    eval_every: usize,
    progress: Progress,
    xi_rng: StreamRng,
    direction_rng: Option<StreamRng>,
    tau: f64,
    g: Vec<f64>,
    u: Vec<f64>,
    shifted: Vec<f64>,
    metric: Vec<f64>,
    forward: Vec<f64>,
}

impl<'p, P: CompositeProblem + ?Sized> Runner<'p, P> {
    pub fn new(problem: &'p P, config: OptimizerConfig, x0: Vector, seed: RunSeed) -> Result<Self> {
        let d = problem.dim();
        check_dim(d, x0.len())?;
        if !problem.regularizer().contains(&x0) {
            return Err(Error::Precondition(
                "starting point lies outside the domain of the regularizer".into(),
            ));
        }
        let steps = config.steps.materialize(config.horizon)?;
        if let OracleKind::ZerothOrder { mu } = config.oracle {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "smoothing radius must be positive, got {mu}"
                )));
            }
        }
        let rho = problem.weak_convexity();
        let alpha_max = steps.iter().copied().fold(0.0, f64::max);
        if rho > 0.0 && alpha_max > 1.0 / (2.0 * rho) {
            log::warn!(
                "stepsize {alpha_max} exceeds 1/(2ρ) = {}; convergence bounds do not apply",
                1.0 / (2.0 * rho)
            );
        }

        let mut tstar_rng = StreamRng::new(key(seed, Purpose::Tstar));
        let tstar = select_tstar(&steps, &mut tstar_rng)?;

        let floor = match (&config.options.initial_vhat, problem.metric_q()) {
            (Some(q), _) => q.clone(),
            (None, Some(q)) if config.ema.mode != AccumulatorMode::Identity => q.diag().clone(),
            _ => Vector::filled(d, config.ema.mode.default_floor())?,
        };
        check_dim(d, floor.len())?;
        let ema = EmaState::new(floor, config.ema.mode)?;

        let xi_rng = StreamRng::new(key(seed, Purpose::Xi));
        let direction_rng = match config.oracle {
            OracleKind::FirstOrder => None,
            OracleKind::ZerothOrder { .. } => Some(StreamRng::new(key(seed, Purpose::Direction))),
        };
        let eval_every = config.options.eval_every.unwrap_or_else(|| problem.epoch_length());
        if eval_every == 0 || config.options.store_every == Some(0) {
            return Err(Error::InvalidParameter(
                "evaluation and storage intervals must be positive".into(),
            ));
        }
        let tau = config.ema.schedule.tau();
        let mut iterates = Vec::new();
        if config.options.store_every.is_some() {
            iterates.push(StoredIterate {
                t: 0,
                x: x0.clone(),
            });
        }
        let initial_objective = problem.composite_value(&x0)?;
        let progress = Progress {
            t: 0,
            theory: TheoryAccumulators {
                sum_alpha_sq_momentum: (tau < 1.0).then_some(0.0),
                max_iterate_inf: x0.norm_inf(),
                ..TheoryAccumulators::default()
            },
            x: x0,
            ema,
            xi_position: xi_rng.position(),
            direction_position: direction_rng.as_ref().map(|r| r.position()),
            iterates,
            initial_objective,
            objective_estimates: Vec::new(),
            x_tstar: None,
            v_hat_tstar: None,
            counts: OracleCounts::default(),
            momentum_running: 0.0,
        };
        Ok(Runner {
            problem,
            config,
            seed,
            steps,
            tstar,
            eval_every,
            progress,
            xi_rng,
            direction_rng,
            tau,
            g: vec![0.0; d],
            u: vec![0.0; d],
            shifted: vec![0.0; d],
            metric: vec![0.0; d],
            forward: vec![0.0; d],
        })
    }

    pub fn resume(problem: &'p P, checkpoint: Checkpoint) -> Result<Self> {
        let Checkpoint {
            config,
            seed,
            tstar,
            progress,
        } = checkpoint;
        let d = problem.dim();
        check_dim(d, progress.x.len())?;
        check_dim(d, progress.ema.dim())?;
        let steps = config.steps.materialize(config.horizon)?;
        if tstar >= steps.len() {
            return Err(Error::Parse(format!("checkpoint t* = {tstar} exceeds horizon")));
        }
        let eval_every = config.options.eval_every.unwrap_or_else(|| problem.epoch_length());
        let xi_rng = StreamRng::restore(progress.xi_position);
        let direction_rng = progress.direction_position.map(StreamRng::restore);
        let tau = config.ema.schedule.tau();
        Ok(Runner {
            problem,
            config,
            seed,
            steps,
            tstar,
            eval_every,
            progress,
            xi_rng,
            direction_rng,
            tau,
            g: vec![0.0; d],
            u: vec![0.0; d],
            shifted: vec![0.0; d],
            metric: vec![0.0; d],
            forward: vec![0.0; d],
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut progress = self.progress.clone();
        progress.xi_position = self.xi_rng.position();
        progress.direction_position = self.direction_rng.as_ref().map(|r| r.position());
        Checkpoint {
            config: self.config.clone(),
            seed: self.seed,
            tstar: self.tstar,
            progress,
        }
    }

    /// Index of the next iteration to run.
    pub fn iteration(&self) -> usize {
        self.progress.t
    }

    pub fn is_finished(&self) -> bool {
        self.progress.t > self.config.horizon
    }

    pub fn tstar(&self) -> usize {
        self.tstar
    }

    pub fn x(&self) -> &Vector {
        &self.progress.x
    }

    pub fn state(&self) -> &EmaState {
        &self.progress.ema
    }

    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Err(Error::InvalidParameter("run already finished".into()));
        }
        let t = self.progress.t;
        self.iterate(t).map_err(|e| e.at_iteration(t))
    }

    pub fn run_to_end(mut self) -> Result<RunTrace> {
        while !self.is_finished() {
            self.step()?;
        }
        self.finish()
    }

    fn iterate(&mut self, t: usize) -> Result<()> {
        let problem = self.problem;
        let p = &mut self.progress;
        if t == self.tstar {
            p.x_tstar = Some(p.x.clone());
        }

        let xi = problem.draw_sample(&mut self.xi_rng);
        p.counts.draws += 1;
        match self.config.oracle {
            OracleKind::FirstOrder => {
                problem.sample_subgradient_into(&p.x, xi, &mut self.g)?;
                p.counts.subgradient_calls += 1;
            }
            OracleKind::ZerothOrder { mu } => {
                let rng = self
                    .direction_rng
                    .as_mut()
                    .expect("zeroth-order runs own a direction stream");
                sample_direction_into(&mut self.u, rng);
                estimate_gradient_into(
                    |z| problem.sample_value(z, xi),
                    &p.x,
                    &self.u,
                    mu,
                    &mut self.shifted,
                    &mut self.g,
                )?;
                p.counts.value_calls += 2;
            }
        }

        let schedule = &self.config.ema.schedule;
        p.ema.update(&self.g, schedule)?;
        if t == self.tstar {
            p.v_hat_tstar = Some(p.ema.v_hat().clone());
        }

        let alpha = self.steps[t];
        let m = p.ema.m();
        let v_hat = p.ema.v_hat();
        for i in 0..self.metric.len() {
            self.metric[i] = v_hat[i].sqrt();
            self.forward[i] = p.x[i] - alpha * m[i] / self.metric[i];
        }
        problem
            .regularizer()
            .prox_into(&self.forward, alpha, &self.metric, p.x.as_mut_slice())?;

        let th = &mut p.theory;
        let g_l1: f64 = self.g.iter().map(|v| v.abs()).sum();
        let g_inf = self.g.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let g_sq: f64 = self.g.iter().map(|v| v * v).sum();
        let sqrt_l1: f64 = self.metric.iter().sum();
        let sqrt_min = self.metric.iter().copied().fold(f64::INFINITY, f64::min);
        let beta1 = schedule.beta1_at(t);
        th.sum_alpha += alpha;
        th.sum_alpha_sq += alpha * alpha;
        if let Some(sum) = th.sum_alpha_sq_momentum.as_mut() {
            p.momentum_running = self.tau * p.momentum_running + g_l1;
            *sum += alpha * alpha * p.momentum_running;
        }
        th.sum_beta1_sq_vhat_sqrt_l1 += beta1 * beta1 * sqrt_l1;
        th.final_vhat_sqrt_l1 = sqrt_l1;
        th.sum_alpha_sq_grad_l1 += alpha * alpha * g_l1;
        th.sum_alpha_sq_grad_sq_over_min_vhat_sqrt += alpha * alpha * g_sq / sqrt_min;
        th.max_grad_inf = th.max_grad_inf.max(g_inf);
        th.max_iterate_inf = th.max_iterate_inf.max(p.x.norm_inf());

        let done = t + 1;
        p.t = done;
        if done % self.eval_every == 0 {
            let value = problem.composite_value(&p.x)?;
            p.objective_estimates.push(ObjectiveRecord {
                iterations: done,
                value,
            });
        }
        if let Some(k) = self.config.options.store_every {
            if done % k == 0 {
                p.iterates.push(StoredIterate {
                    t: done,
                    x: p.x.clone(),
                });
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<RunTrace> {
        let Runner {
            config,
            seed,
            steps,
            tstar,
            mut progress,
            ..
        } = self;
        let last = progress.t;
        if config.options.store_every.is_some()
            && progress.iterates.last().map(|s| s.t) != Some(last)
        {
            progress.iterates.push(StoredIterate {
                t: last,
                x: progress.x.clone(),
            });
        }
        let x_tstar = progress
            .x_tstar
            .ok_or_else(|| Error::Capability("run finished without reaching t*".into()))?;
        let v_hat_tstar = progress
            .v_hat_tstar
            .ok_or_else(|| Error::Capability("run finished without reaching t*".into()))?;
        let seeds = SeedRecord {
            master_seed: seed.master_seed,
            xi_stream: key(seed, Purpose::Xi).stream_id(),
            direction_stream: match config.oracle {
                OracleKind::FirstOrder => None,
                OracleKind::ZerothOrder { .. } => Some(key(seed, Purpose::Direction).stream_id()),
            },
            tstar_stream: key(seed, Purpose::Tstar).stream_id(),
        };
        Ok(RunTrace {
            horizon: config.horizon,
            stepsizes: steps,
            iterates: progress.iterates,
            initial_objective: progress.initial_objective,
            objective_estimates: progress.objective_estimates,
            selected_tstar: tstar,
            x_tstar,
            v_hat_tstar,
            final_x: progress.x,
            final_state: progress.ema,
            seeds,
            counts: progress.counts,
            theory: progress.theory,
        })
    }
}

fn key(seed: RunSeed, purpose: Purpose) -> StreamKey {
    StreamKey::new(seed.master_seed, seed.run, purpose)
}
