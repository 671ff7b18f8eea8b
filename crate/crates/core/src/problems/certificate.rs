//! Numerical certificates of `(ρ, Q)`-weak convexity on sampled point pairs.

use serde::{Deserialize, Serialize};

use super::{CompositeProblem, CompositeProblemExt};
use crate::error::{check_dim, Result};
use crate::numeric::{dot, scaled_norm_sq_slice, NormPower};
use crate::rng::StreamRng;

/// Magnitudes used for both the base point and the pair offset, cycled so
/// that every combination is exercised.
pub const PAIR_SCALES: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub rho: f64,
    pub pairs: usize,
    /// Largest amount by which `f(y) ≥ f(x) + ⟨g, y−x⟩ − (ρ/2)‖Q^{1/2}(y−x)‖²` failed.
    pub max_subgradient_violation: f64,
    /// Largest amount by which `⟨g(x) − g(y), x − y⟩ ≥ −ρ‖Q^{1/2}(x−y)‖²` failed.
    pub max_hypomonotone_violation: f64,
}

impl CertificateReport {
    pub fn holds(&self, slack: f64) -> bool {
        self.max_subgradient_violation <= slack && self.max_hypomonotone_violation <= slack
    }
}

pub fn subgradient_inequality_violation<P: CompositeProblem + ?Sized>(
    problem: &P,
    rho: f64,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    check_dim(problem.dim(), x.len())?;
    check_dim(problem.dim(), y.len())?;
    let q = problem.metric_or_identity();
    let mut g = vec![0.0; x.len()];
    problem.full_subgradient_into(x, &mut g)?;
    let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let lower = problem.objective(x)? + dot(&g, &diff)
        - 0.5 * rho * scaled_norm_sq_slice(&diff, q.diag(), NormPower::Half);
    Ok(lower - problem.objective(y)?)
}

pub fn hypomonotonicity_violation<P: CompositeProblem + ?Sized>(
    problem: &P,
    rho: f64,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    check_dim(problem.dim(), x.len())?;
    check_dim(problem.dim(), y.len())?;
    let q = problem.metric_or_identity();
    let mut gx = vec![0.0; x.len()];
    let mut gy = vec![0.0; x.len()];
    problem.full_subgradient_into(x, &mut gx)?;
    problem.full_subgradient_into(y, &mut gy)?;
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let gdiff: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a - b).collect();
    let lower = -rho * scaled_norm_sq_slice(&diff, q.diag(), NormPower::Half);
    Ok(lower - dot(&gdiff, &diff))
}

/// Checks both weak-convexity inequalities with constant `rho` on `pairs`
/// random pairs whose base points and offsets cycle through [`PAIR_SCALES`].
pub fn weak_convexity_certificate<P: CompositeProblem + ?Sized>(
    problem: &P,
    rho: f64,
    pairs: usize,
    rng: &mut StreamRng,
) -> Result<CertificateReport> {
    let d = problem.dim();
    let mut report = CertificateReport {
        rho,
        pairs,
        max_subgradient_violation: f64::NEG_INFINITY,
        max_hypomonotone_violation: f64::NEG_INFINITY,
    };
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    for k in 0..pairs {
        let base = PAIR_SCALES[k % PAIR_SCALES.len()];
        let offset = PAIR_SCALES[(k / PAIR_SCALES.len()) % PAIR_SCALES.len()];
        for j in 0..d {
            x[j] = base * rng.standard_normal();
            y[j] = x[j] + offset * rng.standard_normal();
        }
        let sub = subgradient_inequality_violation(problem, rho, &x, &y)?;
        let hyp = hypomonotonicity_violation(problem, rho, &x, &y)?;
        report.max_subgradient_violation = report.max_subgradient_violation.max(sub);
        report.max_hypomonotone_violation = report.max_hypomonotone_violation.max(hyp);
    }
    Ok(report)
}
