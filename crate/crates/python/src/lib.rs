//! Python module `pyemaopt`: phase retrieval instances, single runs, Moreau
//! stationarity reports, the a priori bound, and config-driven sweeps.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;

use emaopt::accumulators::{Beta1Mode, DecaySchedule};
use emaopt::harness::{self, Algorithm, ExperimentConfig};
use emaopt::moreau::{self, BoundConstants, BoundVariant, ProxPointOptions};
use emaopt::numeric::{DiagonalMetric, Vector};
use emaopt::optimizers::{self, OptimizerConfig, OracleKind, RunOptions, RunSeed, StepsizeSchedule};
use emaopt::problems::{self, CompositeProblem};
use emaopt::regularizer::Regularizer;
use emaopt::rng::RunId;

fn err(e: emaopt::Error) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_python<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn vector(v: Vec<f64>) -> PyResult<Vector> {
    Vector::new(v).map_err(err)
}

/// Robust phase retrieval `mean |⟨a, x⟩² − b|` with an optional L1 penalty
/// or ball constraint.
#[pyclass(frozen, module = "pyemaopt")]
struct PhaseRetrieval {
    inner: Arc<problems::PhaseRetrieval>,
}

#[pymethods]
impl PhaseRetrieval {
    #[new]
    #[pyo3(signature = (d, n, seed, l1_weight=None, ball_radius=None))]
    fn new(d: usize, n: usize, seed: u64, l1_weight: Option<f64>, ball_radius: Option<f64>) -> PyResult<Self> {
        let mut p = problems::generate_phase_retrieval(d, n, seed).map_err(err)?;
        match (l1_weight, ball_radius) {
            (Some(_), Some(_)) => return Err(PyValueError::new_err("pass l1_weight or ball_radius, not both")),
            (Some(w), None) => p = p.with_regularizer(Regularizer::l1(w).map_err(err)?),
            (None, Some(r)) => p = p.with_regularizer(Regularizer::ball(r).map_err(err)?),
            (None, None) => {}
        }
        Ok(PhaseRetrieval { inner: Arc::new(p) })
    }

    /// Parses the instance text format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let p = problems::PhaseRetrieval::from_text(text).map_err(err)?;
        Ok(PhaseRetrieval { inner: Arc::new(p) })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn weak_convexity(&self) -> f64 {
        self.inner.weak_convexity()
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.objective(&x).map_err(err)
    }

    /// `f(x) + h(x)`.
    fn composite_value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.composite_value(&x).map_err(err)
    }

    fn optimal_value(&self) -> Option<f64> {
        self.inner.optimal_value()
    }

    #[pyo3(signature = (master_seed, repetition=0))]
    fn initial_point(&self, master_seed: u64, repetition: u16) -> PyResult<Vec<f64>> {
        let run = RunId {
            repetition,
            ..RunId::default()
        };
        Ok(self.inner.initial_point(master_seed, run).map_err(err)?.into_inner())
    }

    fn __repr__(&self) -> String {
        format!("PhaseRetrieval(d={})", self.inner.dim())
    }
}

/// One run of an algorithm (`"FEMA3"`, `"ZSGD"`, ...). Returns the trace as a
/// dict with `x_tstar`, `v_hat_tstar`, `selected_tstar`, `objective_estimates`
/// and the rest of the run record.
#[pyfunction]
#[pyo3(signature = (problem, algorithm, alpha, horizon, x0, seed=0, step_rule="constant_over_sqrt_t", mu=None))]
#[allow(clippy::too_many_arguments)]
fn run(
    py: Python<'_>,
    problem: &PhaseRetrieval,
    algorithm: &str,
    alpha: f64,
    horizon: usize,
    x0: Vec<f64>,
    seed: u64,
    step_rule: &str,
    mu: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let alg: Algorithm = algorithm.parse().map_err(err)?;
    let steps = match step_rule {
        "constant" => StepsizeSchedule::Constant { alpha },
        "constant_over_sqrt_t" => StepsizeSchedule::ConstantOverSqrtT { alpha },
        other => return Err(PyValueError::new_err(format!("unknown step_rule `{other}`"))),
    };
    let oracle = if alg.is_zeroth_order() {
        OracleKind::ZerothOrder {
            mu: mu.unwrap_or_else(|| optimizers::default_mu(problem.inner.dim(), horizon)),
        }
    } else {
        OracleKind::FirstOrder
    };
    let config = OptimizerConfig {
        ema: alg.ema(),
        steps,
        horizon,
        oracle,
        options: RunOptions::default(),
    };
    let seed = RunSeed {
        master_seed: seed,
        run: RunId {
            algorithm: alg.code(),
            ..RunId::default()
        },
    };
    let x0 = vector(x0)?;
    let inner = problem.inner.clone();
    let trace = py
        .detach(move || optimizers::run(inner.as_ref(), config, x0, seed))
        .map_err(err)?;
    to_python(py, &trace)
}

/// Moreau envelope report at `x`. `metric=None` is the identity; `zeta=None`
/// uses the harness default (`1/(2ρ_M)`, or 1 for a convex instance).
#[pyfunction]
#[pyo3(signature = (problem, x, zeta=None, metric=None, max_iter=moreau::DEFAULT_MAX_ITER))]
fn moreau_gradient(
    py: Python<'_>,
    problem: &PhaseRetrieval,
    x: Vec<f64>,
    zeta: Option<f64>,
    metric: Option<Vec<f64>>,
    max_iter: usize,
) -> PyResult<Py<PyAny>> {
    let m = match metric {
        Some(m) => DiagonalMetric::from_vec(m).map_err(err)?,
        None => DiagonalMetric::identity(problem.inner.dim()),
    };
    let zeta = zeta.unwrap_or_else(|| harness::experiment::reporting_zeta(problem.inner.as_ref(), &m));
    let options = ProxPointOptions {
        max_iter,
        ..ProxPointOptions::default()
    };
    let report = moreau::moreau_gradient(problem.inner.as_ref(), &vector(x)?, zeta, &m, &options).map_err(err)?;
    to_python(py, &report)
}

/// A priori stationarity bound as a dict of its terms.
#[pyfunction]
#[pyo3(signature = (
    rho, rho_bar, d_inf, dim, horizon, alpha, variant="projected-fema", g_inf=1.0,
    beta1=0.9, beta2=0.999, beta3=0.9, pi=None, delta_psi=1.0, mu=None, lipschitz=None, lambda_min_q=None
))]
#[allow(clippy::too_many_arguments)]
fn theory_bound(
    py: Python<'_>,
    rho: f64,
    rho_bar: f64,
    d_inf: f64,
    dim: usize,
    horizon: usize,
    alpha: f64,
    variant: &str,
    g_inf: f64,
    beta1: f64,
    beta2: f64,
    beta3: f64,
    pi: Option<f64>,
    delta_psi: f64,
    mu: Option<f64>,
    lipschitz: Option<f64>,
    lambda_min_q: Option<f64>,
) -> PyResult<Py<PyAny>> {
    let variant: BoundVariant = variant.parse().map_err(err)?;
    let mode = pi.map_or(Beta1Mode::Constant, |pi| Beta1Mode::Geometric { pi });
    let constants = BoundConstants {
        rho,
        rho_bar,
        g_inf,
        d_inf,
        dim,
        horizon,
        schedule: DecaySchedule::new(beta1, mode, beta2, beta3).map_err(err)?,
        alpha,
        delta_psi,
        mu,
        lipschitz,
        lambda_min_q,
    };
    to_python(py, &moreau::theory_bound(&constants, variant).map_err(err)?)
}

/// Checks a config file; returns it as a dict.
#[pyfunction]
fn validate_config(py: Python<'_>, path: PathBuf) -> PyResult<Py<PyAny>> {
    let config = ExperimentConfig::load(&path).map_err(err)?;
    to_python(py, &config)
}

/// Runs the sweep in a config file and writes the CSVs to `output`
/// (default: the config's own output directory). Returns the written paths.
#[pyfunction]
#[pyo3(signature = (path, output=None))]
fn run_config(py: Python<'_>, path: PathBuf, output: Option<PathBuf>) -> PyResult<Vec<PathBuf>> {
    let config = ExperimentConfig::load(&path).map_err(err)?;
    let dir = harness::resolve_output_dir(None, output.as_deref(), &config);
    py.detach(move || {
        let result = harness::run_experiment(&config)?;
        harness::write_outputs(&result, &dir)
    })
    .map_err(err)
}

#[pyfunction]
fn algorithms() -> Vec<&'static str> {
    Algorithm::ALL.iter().map(|a| a.name()).collect()
}

#[pymodule]
fn pyemaopt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PhaseRetrieval>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(moreau_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(theory_bound, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    m.add_function(wrap_pyfunction!(algorithms, m)?)?;
    Ok(())
}
