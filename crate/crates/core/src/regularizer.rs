//! The convex term `h` of a composite objective and its scaled proximal map
//! `argmin_y { h(y) + (1/2α)‖M^{1/2}(x − y)‖² }` for a diagonal metric `M`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numeric::{DiagonalMetric, Vector};

const BALL_TOL: f64 = 1e-12;
const BALL_MAX_ITER: usize = 100;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regularizer {
    #[default]
    Zero,
    /// Indicator of `{x : lower ≤ x ≤ upper}`.
    Box { lower: Vector, upper: Vector },
    /// `weight · ‖x‖₁`
    L1 { weight: f64 },
    /// Indicator of the Euclidean ball `{x : ‖x‖ ≤ radius}`.
    Ball { radius: f64 },
}

impl Regularizer {
    pub fn box_indicator(lower: Vector, upper: Vector) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
            return Err(Error::InvalidParameter(format!(
                "box lower bound {} exceeds upper bound {} at coordinate {i}",
                lower[i], upper[i]
            )));
        }
        Ok(Regularizer::Box { lower, upper })
    }

    pub fn l1(weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "l1 weight must be finite and nonnegative, got {weight}"
            )));
        }
        Ok(Regularizer::L1 { weight })
    }

    pub fn ball(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ball radius must be finite and positive, got {radius}"
            )));
        }
        Ok(Regularizer::Ball { radius })
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, Regularizer::Box { .. } | Regularizer::Ball { .. })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }

    /// `h(x)`; indicators return `+∞` outside their set.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if let Regularizer::Box { lower, .. } = self {
            check_dim(lower.len(), x.len())?;
        }
        Ok(match self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            _ if self.contains(x) => 0.0,
            _ => f64::INFINITY,
        })
    }

    /// Membership in the domain of `h`. The ball check allows a relative
    /// rounding slack of `1e-12`; box membership is exact.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Regularizer::Zero | Regularizer::L1 { .. } => true,
            Regularizer::Box { lower, upper } => {
                x.len() == lower.len()
                    && x.iter()
                        .zip(lower.iter().zip(upper.iter()))
                        .all(|(v, (lo, hi))| lo <= v && v <= hi)
            }
            Regularizer::Ball { radius } => {
                let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                norm <= radius * (1.0 + BALL_TOL)
            }
        }
    }

    pub fn scaled_prox(&self, x: &Vector, stepsize: f64, metric: &DiagonalMetric) -> Result<Vector> {
        check_dim(metric.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.prox_into(x, stepsize, metric.diag(), &mut out)?;
        Vector::new(out)
    }

    /// Scaled projection onto the set of an indicator regularizer.
    pub fn scaled_project(&self, x: &Vector, metric: &DiagonalMetric) -> Result<Vector> {
        if !self.is_indicator() {
            return Err(Error::Capability(format!(
                "projection requires an indicator regularizer, got {self:?}"
            )));
        }
        self.scaled_prox(x, 1.0, metric)
    }

    /// Slice form of [`Regularizer::scaled_prox`] used in optimizer inner
    /// loops. `metric` holds the (already validated) positive diagonal.
    pub(crate) fn prox_into(
        &self,
        x: &[f64],
        stepsize: f64,
        metric: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        if !(stepsize > 0.0 && stepsize.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "prox stepsize must be positive, got {stepsize}"
            )));
        }
        check_dim(metric.len(), x.len())?;
        match self {
            Regularizer::Zero => out.copy_from_slice(x),
            Regularizer::Box { lower, upper } => {
                check_dim(lower.len(), x.len())?;
                for i in 0..x.len() {
                    out[i] = x[i].clamp(lower[i], upper[i]);
                }
            }
            Regularizer::L1 { weight } => {
                for i in 0..x.len() {
                    out[i] = soft_threshold(x[i], stepsize * weight / metric[i]);
                }
            }
            Regularizer::Ball { radius } => project_ball(x, *radius, metric, out)?,
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scaled prox".into()));
        }
        Ok(())
    }
}

/// `sign(x)·max(|x| − t, 0)`; a tie `|x| = t` maps to zero.
pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x.abs() <= threshold {
        0.0
    } else {
        x - threshold.copysign(x)
    }
}

fn project_ball(x: &[f64], radius: f64, metric: &[f64], out: &mut [f64]) -> Result<()> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= radius {
        out.copy_from_slice(x);
        return Ok(());
    }
    let uniform = metric.iter().all(|&m| m == metric[0]);
    if uniform {
        let scale = radius / norm;
        for (o, v) in out.iter_mut().zip(x) {
            *o = v * scale;
        }
        return Ok(());
    }

    // KKT: y_i = m_i x_i / (m_i + λ) with ‖y(λ)‖ = r. Newton on the secular
    // function 1/‖y(λ)‖ − 1/r, which is concave and increasing in λ, so the
    // iterates increase monotonically from λ = 0 to the root.
    let mut lambda = 0.0_f64;
    for _ in 0..BALL_MAX_ITER {
        let mut norm_sq = 0.0;
        let mut weighted = 0.0;
        for i in 0..x.len() {
            let denom = metric[i] + lambda;
            let y = metric[i] * x[i] / denom;
            out[i] = y;
            norm_sq += y * y;
            weighted += y * y / denom;
        }
        let norm = norm_sq.sqrt();
        if (norm - radius).abs() <= BALL_TOL * radius {
            if norm > radius {
                let scale = radius / norm;
                out.iter_mut().for_each(|v| *v *= scale);
            }
            return Ok(());
        }
        let value = 1.0 / norm - 1.0 / radius;
        let slope = weighted / (norm_sq * norm);
        lambda -= value / slope;
    }
    Err(Error::Capability(format!(
        "ball projection under a non-uniform metric did not converge in {BALL_MAX_ITER} iterations"
    )))
}
