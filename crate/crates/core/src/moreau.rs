//! Scaled Moreau envelope `ψ_{ζ,M}(x) = min_y ψ(y) + (1/2ζ)‖M^{1/2}(x − y)‖²`,
//! its gradient `ζ⁻¹M(x − x̄)` used as the stationarity measure, and the
//! worst-case bounds the methods come with.

use serde::{Deserialize, Serialize};

use crate::accumulators::{Beta1Mode, DecaySchedule};
use crate::error::{check_dim, Error, Result};
use crate::numeric::{scaled_norm_sq_slice, DiagonalMetric, NormPower, Vector};
use crate::optimizers::RunTrace;
use crate::problems::CompositeProblem;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Skip any closed form and always run the inner solver.
    #[serde(default)]
    pub force_iterative: bool,
}

impl Default for ProxPointOptions {
    fn default() -> Self {
        ProxPointOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            force_iterative: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxMethod {
    ClosedForm,
    /// Proximal gradient with a constant step; used when `f` is smooth.
    ProximalGradient,
    /// Proximal subgradient with steps `2/(σ(k+2))` and `(k+1)`-weighted averaging.
    ProximalSubgradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxPoint {
    pub point: Vector,
    pub method: ProxMethod,
    pub converged: bool,
    /// Scaled distance between the last two iterates (0 for closed forms).
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub x: Vector,
    pub zeta: f64,
    pub metric: DiagonalMetric,
    pub prox_point: Vector,
    /// `‖∇ψ_{ζ,M}(x)‖² = ζ⁻² Σᵢ Mᵢ²(xᵢ − x̄ᵢ)²`
    pub grad_norm_sq: f64,
    pub envelope_value: f64,
    /// `ψ(x̄)`
    pub psi_prox: f64,
    /// `ψ(x)`; infinite outside the domain of `h`.
    pub psi_x: f64,
    pub inner_residual: f64,
    pub inner_iterations: usize,
    pub converged: bool,
    pub method: ProxMethod,
}

impl StationarityReport {
    /// `∇ψ_{ζ,M}(x) = ζ⁻¹M(x − x̄)`
    pub fn gradient(&self) -> Vector {
        let m = self.metric.diag();
        Vector::from_checked(
            (0..self.x.len())
                .map(|i| m[i] * (self.x[i] - self.prox_point[i]) / self.zeta)
                .collect(),
        )
    }
}

/// Weak-convexity constant of `f` measured in the metric `M`:
/// `ρ‖Q^{1/2}z‖² ≤ ρ·maxᵢ(qᵢ/Mᵢ)·‖M^{1/2}z‖²`.
pub fn metric_weak_convexity<P: CompositeProblem + ?Sized>(problem: &P, metric: &DiagonalMetric) -> f64 {
    let rho = problem.weak_convexity();
    let ratio = match problem.metric_q() {
        Some(q) => (0..metric.dim())
            .map(|i| q.diag()[i] / metric.diag()[i])
            .fold(0.0, f64::max),
        None => 1.0 / metric.min(),
    };
    rho * ratio
}

/// `ζ = 1/(2ρ_M)`, or `None` for convex `f` where any `ζ > 0` works.
pub fn default_zeta<P: CompositeProblem + ?Sized>(problem: &P, metric: &DiagonalMetric) -> Option<f64> {
    let rho = metric_weak_convexity(problem, metric);
    (rho > 0.0).then(|| 1.0 / (2.0 * rho))
}

pub fn scaled_prox_point<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &Vector,
    zeta: f64,
    metric: &DiagonalMetric,
    options: &ProxPointOptions,
) -> Result<ProxPoint> {
    let d = problem.dim();
    check_dim(d, x.len())?;
    check_dim(d, metric.dim())?;
    if !(zeta > 0.0 && zeta.is_finite()) {
        return Err(Error::InvalidParameter(format!("zeta must be positive, got {zeta}")));
    }
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::InvalidParameter(
            "inner solver needs tol > 0 and max_iter ≥ 1".into(),
        ));
    }
    let rho_m = metric_weak_convexity(problem, metric);
    if zeta * rho_m >= 1.0 {
        return Err(Error::Precondition(format!(
            "zeta·rho = {} must be below 1 for the prox subproblem to be strongly convex",
            zeta * rho_m
        )));
    }
    let m = metric.diag();
    if !options.force_iterative {
        if let Some(point) = problem.closed_form_prox(x, zeta, m) {
            return Ok(ProxPoint {
                point: Vector::new(point?)?,
                method: ProxMethod::ClosedForm,
                converged: true,
                residual: 0.0,
                iterations: 0,
            });
        }
    }

    let sigma = 1.0 / zeta - rho_m;
    let h = problem.regularizer();
    let mut y = vec![0.0; d];
    h.prox_into(x, 1.0, m, &mut y)?;
    let mut g = vec![0.0; d];
    let mut center = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut diff = vec![0.0; d];

    // One step: y⁺ = argmin ⟨g, y⟩ + h(y) + (1/2ζ)‖y − x‖²_M + (1/2η)‖y − y_k‖²_M.
    let mut step = |y: &[f64], eta: f64, g: &mut [f64], out: &mut [f64]| -> Result<()> {
        problem.full_subgradient_into(y, g)?;
        let weight = 1.0 / zeta + 1.0 / eta;
        for i in 0..d {
            center[i] = (x[i] / zeta + y[i] / eta - g[i] / m[i]) / weight;
        }
        h.prox_into(&center, 1.0 / weight, m, out)
    };

    let result = if let Some(smoothness) = problem.smoothness() {
        // ∇f is L-Lipschitz in ℓ₂, hence L/minᵢMᵢ-Lipschitz in the M-norm.
        let eta = if smoothness > 0.0 { metric.min() / smoothness } else { zeta };
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        while iterations < options.max_iter {
            step(&y, eta, &mut g, &mut next)?;
            iterations += 1;
            for i in 0..d {
                diff[i] = next[i] - y[i];
            }
            residual = scaled_norm_sq_slice(&diff, m, NormPower::Half).sqrt();
            std::mem::swap(&mut y, &mut next);
            if residual < options.tol {
                break;
            }
        }
        ProxPoint {
            point: Vector::new(y)?,
            method: ProxMethod::ProximalGradient,
            converged: residual < options.tol,
            residual,
            iterations,
        }
    } else {
        let mut average = y.clone();
        let mut weight_total = 0.0;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        while iterations < options.max_iter {
            let k = iterations as f64;
            let eta = 2.0 / (sigma * (k + 2.0));
            step(&y, eta, &mut g, &mut next)?;
            std::mem::swap(&mut y, &mut next);
            iterations += 1;
            let w = k + 1.0;
            weight_total += w;
            for i in 0..d {
                let updated = average[i] + (w / weight_total) * (y[i] - average[i]);
                diff[i] = updated - average[i];
                average[i] = updated;
            }
            residual = scaled_norm_sq_slice(&diff, m, NormPower::Half).sqrt();
            if iterations > 1 && residual < options.tol {
                break;
            }
        }
        ProxPoint {
            point: Vector::new(average)?,
            method: ProxMethod::ProximalSubgradient,
            converged: residual < options.tol,
            residual,
            iterations,
        }
    };
    if !result.converged {
        log::debug!(
            "inner prox solver stopped after {} iterations with residual {}",
            result.iterations,
            result.residual
        );
    }
    Ok(result)
}

pub fn moreau_gradient<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &Vector,
    zeta: f64,
    metric: &DiagonalMetric,
    options: &ProxPointOptions,
) -> Result<StationarityReport> {
    let prox = scaled_prox_point(problem, x, zeta, metric, options)?;
    let m = metric.diag();
    let diff: Vec<f64> = x.iter().zip(prox.point.iter()).map(|(a, b)| a - b).collect();
    let grad_norm_sq = diff
        .iter()
        .zip(m.iter())
        .map(|(z, w)| (w * z / zeta).powi(2))
        .sum();
    let psi_prox = problem.composite_value(&prox.point)?;
    let psi_x = problem.composite_value(x)?;
    let envelope_value = psi_prox + scaled_norm_sq_slice(&diff, m, NormPower::Half) / (2.0 * zeta);
    Ok(StationarityReport {
        x: x.clone(),
        zeta,
        metric: metric.clone(),
        prox_point: prox.point,
        grad_norm_sq,
        envelope_value,
        psi_prox,
        psi_x,
        inner_residual: prox.residual,
        inner_iterations: prox.iterations,
        converged: prox.converged,
        method: prox.method,
    })
}

pub fn envelope_value<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &Vector,
    zeta: f64,
    metric: &DiagonalMetric,
    options: &ProxPointOptions,
) -> Result<f64> {
    Ok(moreau_gradient(problem, x, zeta, metric, options)?.envelope_value)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVariant {
    ProjectedFema,
    ProximalFema,
    ProjectedZema,
    ProximalZema,
}

impl BoundVariant {
    fn is_proximal(self) -> bool {
        matches!(self, BoundVariant::ProximalFema | BoundVariant::ProximalZema)
    }

    fn is_zeroth_order(self) -> bool {
        matches!(self, BoundVariant::ProjectedZema | BoundVariant::ProximalZema)
    }
}

impl std::str::FromStr for BoundVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projected_fema" | "projected-fema" => Ok(BoundVariant::ProjectedFema),
            "proximal_fema" | "proximal-fema" => Ok(BoundVariant::ProximalFema),
            "projected_zema" | "projected-zema" => Ok(BoundVariant::ProjectedZema),
            "proximal_zema" | "proximal-zema" => Ok(BoundVariant::ProximalZema),
            _ => Err(Error::InvalidParameter(format!("unknown bound variant `{s}`"))),
        }
    }
}

/// Problem and method constants entering the bounds. Stepsizes are
/// `αₜ = α/√(T+1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub rho: f64,
    pub rho_bar: f64,
    /// Bound on `‖gₜ‖_∞` (first-order variants).
    pub g_inf: f64,
    /// Bound on `‖xₜ − x‖_∞` over the iterates.
    pub d_inf: f64,
    pub dim: usize,
    /// `T`
    pub horizon: usize,
    pub schedule: DecaySchedule,
    pub alpha: f64,
    /// Initial envelope gap `ψ_{1/ρ̄}(x₀) − ψ*`.
    pub delta_psi: f64,
    /// Smoothing radius; defaults to `d/√(T+1)`.
    pub mu: Option<f64>,
    /// `L_F`, required by the zeroth-order variants.
    pub lipschitz: Option<f64>,
    /// Smallest entry of `q`; defaults to 1.
    pub lambda_min_q: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub c1: f64,
    pub c2: f64,
    pub c3: Option<f64>,
    pub sum_alpha: f64,
    pub sum_alpha_sq: f64,
    pub bound: f64,
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn check_common(c: &BoundConstants, variant: BoundVariant) -> Result<(f64, f64)> {
    let positive = [
        ("rho_bar", c.rho_bar),
        ("alpha", c.alpha),
        ("d_inf", c.d_inf),
    ];
    for (name, value) in positive {
        if !(value > 0.0 && value.is_finite()) {
            return Err(domain(format!("{name} must be positive, got {value}")));
        }
    }
    if !(c.rho >= 0.0) || !(c.delta_psi >= 0.0) || !(c.g_inf >= 0.0) {
        return Err(domain("rho, g_inf and delta_psi must be nonnegative"));
    }
    if c.dim == 0 {
        return Err(domain("dimension must be positive"));
    }
    if c.rho_bar <= c.rho {
        return Err(domain(format!(
            "rho_bar = {} must exceed rho = {}",
            c.rho_bar, c.rho
        )));
    }
    let s = &c.schedule;
    let tau = s.tau();
    if !(tau < 1.0) {
        return Err(domain(format!("tau = beta1/sqrt(beta2) = {tau} must be below 1")));
    }
    let steps = (c.horizon as f64 + 1.0).sqrt();
    let alpha_t = c.alpha / steps;
    if variant.is_proximal() {
        if c.rho_bar > 2.0 * c.rho {
            return Err(domain(format!(
                "proximal bounds need rho_bar ≤ 2·rho, got {} > {}",
                c.rho_bar,
                2.0 * c.rho
            )));
        }
        if alpha_t > 1.0 / c.rho_bar {
            return Err(domain(format!(
                "proximal bounds need alpha_t = {alpha_t} ≤ 1/rho_bar = {}",
                1.0 / c.rho_bar
            )));
        }
    }
    Ok((tau, alpha_t))
}

/// Sum factor `Σ β₁,ₜ²` as bounded in the corollaries.
fn beta1_sum(s: &DecaySchedule, horizon: usize) -> Result<f64> {
    match s.beta1_mode {
        Beta1Mode::Constant => Ok((horizon as f64 + 1.0) * s.beta1 * s.beta1),
        Beta1Mode::Geometric { pi } => {
            if pi >= 0.5 {
                return Err(domain(format!(
                    "geometric decay pi = {pi} must be below 1/2 for the 1/(1−2π) bound"
                )));
            }
            Ok(s.beta1 * s.beta1 / (1.0 - 2.0 * pi))
        }
    }
}

/// A priori bound on `E‖∇ψ_{1/ρ̄}(x_{t*})‖²` with corollary-style constants.
pub fn theory_bound(c: &BoundConstants, variant: BoundVariant) -> Result<BoundBreakdown> {
    let (tau, _) = check_common(c, variant)?;
    let s = &c.schedule;
    let d = c.dim as f64;
    let (grad_bound, c3) = if variant.is_zeroth_order() {
        let lf = c
            .lipschitz
            .filter(|l| *l > 0.0 && l.is_finite())
            .ok_or_else(|| domain("zeroth-order bounds need a positive lipschitz constant"))?;
        let mu = c.mu.unwrap_or_else(|| d / (c.horizon as f64 + 1.0).sqrt());
        if !(mu > 0.0) {
            return Err(domain(format!("mu must be positive, got {mu}")));
        }
        (d * lf, Some(2.0 * mu * lf))
    } else {
        (c.g_inf, None)
    };
    let root = ((1.0 - s.beta2) * (1.0 - s.beta3)).sqrt();
    let c1 = if variant.is_proximal() {
        let lambda = c.lambda_min_q.unwrap_or(1.0);
        if !(lambda > 0.0) {
            return Err(domain("lambda_min_q must be positive"));
        }
        (2.0 / ((1.0 - tau) * (1.0 - s.beta1)) + 1.0) * d * grad_bound / root
            + d * grad_bound * grad_bound / lambda
    } else {
        d * grad_bound / ((1.0 - tau) * (1.0 - s.beta1) * root)
    };
    let c2 = d * c.d_inf * c.d_inf * grad_bound / 2.0 * (beta1_sum(s, c.horizon)? + 1.0);
    let steps = c.horizon as f64 + 1.0;
    let sum_alpha = c.alpha * steps.sqrt();
    let sum_alpha_sq = c.alpha * c.alpha;
    Ok(assemble(c, variant, c1 * sum_alpha_sq, c2, c3, sum_alpha, sum_alpha_sq, c1))
}

/// A posteriori bound: the same expression with the empirical sums collected
/// during a run in place of their a priori upper bounds.
pub fn theory_bound_from_trace(
    c: &BoundConstants,
    variant: BoundVariant,
    trace: &RunTrace,
) -> Result<BoundBreakdown> {
    check_common(c, variant)?;
    let s = &c.schedule;
    let th = &trace.theory;
    let root = ((1.0 - s.beta2) * (1.0 - s.beta3)).sqrt();
    let momentum = th
        .sum_alpha_sq_momentum
        .ok_or_else(|| domain("trace was recorded with tau ≥ 1"))?;
    let weighted_c1 = if variant.is_proximal() {
        (2.0 * momentum / (1.0 - s.beta1) + th.sum_alpha_sq_grad_l1) / root
            + th.sum_alpha_sq_grad_sq_over_min_vhat_sqrt
    } else {
        momentum / ((1.0 - s.beta1) * root)
    };
    let c2 = c.d_inf * c.d_inf / 2.0 * (th.sum_beta1_sq_vhat_sqrt_l1 + th.final_vhat_sqrt_l1);
    let c3 = if variant.is_zeroth_order() {
        let lf = c
            .lipschitz
            .filter(|l| *l > 0.0)
            .ok_or_else(|| domain("zeroth-order bounds need a positive lipschitz constant"))?;
        let mu = c
            .mu
            .unwrap_or_else(|| c.dim as f64 / (trace.horizon as f64 + 1.0).sqrt());
        Some(2.0 * mu * lf)
    } else {
        None
    };
    let c1 = weighted_c1 / th.sum_alpha_sq;
    Ok(assemble(
        c,
        variant,
        weighted_c1,
        c2,
        c3,
        th.sum_alpha,
        th.sum_alpha_sq,
        c1,
    ))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    c: &BoundConstants,
    variant: BoundVariant,
    weighted_c1: f64,
    c2: f64,
    c3: Option<f64>,
    sum_alpha: f64,
    sum_alpha_sq: f64,
    c1: f64,
) -> BoundBreakdown {
    let rb = c.rho_bar;
    let gap = rb - c.rho;
    let numerator = rb * c.delta_psi + rb * rb * (weighted_c1 + c2);
    let mut bound = if variant.is_proximal() {
        numerator / (gap * sum_alpha)
    } else {
        numerator / (gap * (1.0 - c.schedule.beta1) * sum_alpha)
    };
    if let Some(c3) = c3 {
        bound += if variant.is_proximal() {
            rb * c3 / gap
        } else {
            rb * rb * c3 / gap
        };
    }
    BoundBreakdown {
        c1,
        c2,
        c3,
        sum_alpha,
        sum_alpha_sq,
        bound,
    }
}
