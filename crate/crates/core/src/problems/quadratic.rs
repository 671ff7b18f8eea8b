//! Separable quadratic `f(x) = Σᵢ Aᵢxᵢ² + ⟨c, x⟩`, a smooth weakly convex
//! test oracle with an exact scaled prox.

use serde::{Deserialize, Serialize};

use super::{CompositeProblem, Sample, SampleSpace};
use crate::error::{check_dim, Error, Result};
use crate::numeric::{dot, Vector};
use crate::regularizer::{soft_threshold, Regularizer};
use crate::rng::splitmix64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    spectrum: Vector,
    linear: Vector,
    /// Half-width of the uniform gradient perturbation.
    noise: f64,
    epoch_length: usize,
    regularizer: Regularizer,
}

pub fn make_test_quadratic(spectrum: Vector, linear: Vector) -> Result<Quadratic> {
    check_dim(spectrum.len(), linear.len())?;
    if spectrum.is_empty() {
        return Err(Error::InvalidParameter("quadratic needs d ≥ 1".into()));
    }
    Ok(Quadratic {
        spectrum,
        linear,
        noise: 0.0,
        epoch_length: 1,
        regularizer: Regularizer::Zero,
    })
}

impl Quadratic {
    /// Adds the bounded zero-mean perturbation `e ~ U[−s, s]^d` to every
    /// sample: `F(x, ξ) = f(x) + ⟨e, x⟩`, `G(x, ξ) = ∇f(x) + e`.
    pub fn with_noise(mut self, half_width: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise half-width must be finite and nonnegative, got {half_width}"
            )));
        }
        self.noise = half_width;
        Ok(self)
    }

    pub fn with_regularizer(mut self, regularizer: Regularizer) -> Self {
        self.regularizer = regularizer;
        self
    }

    pub fn with_epoch_length(mut self, draws: usize) -> Result<Self> {
        if draws == 0 {
            return Err(Error::InvalidParameter("epoch length must be positive".into()));
        }
        self.epoch_length = draws;
        Ok(self)
    }

    pub fn spectrum(&self) -> &Vector {
        &self.spectrum
    }

    pub fn linear(&self) -> &Vector {
        &self.linear
    }

    fn perturbation(&self, xi: Sample, i: usize) -> f64 {
        if self.noise == 0.0 {
            return 0.0;
        }
        let mut state = xi.0 ^ (i as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
        let unit = (splitmix64(&mut state) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        self.noise * (2.0 * unit - 1.0)
    }
}

impl CompositeProblem for Quadratic {
    fn dim(&self) -> usize {
        self.spectrum.len()
    }

    fn weak_convexity(&self) -> f64 {
        let min = self.spectrum.iter().copied().fold(f64::INFINITY, f64::min);
        (-2.0 * min).max(0.0)
    }

    fn sample_space(&self) -> SampleSpace {
        SampleSpace::Streaming
    }

    fn epoch_length(&self) -> usize {
        self.epoch_length
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn smoothness(&self) -> Option<f64> {
        Some(2.0 * self.spectrum.norm_inf())
    }

    fn sample_value(&self, x: &[f64], xi: Sample) -> Result<f64> {
        let base = self.objective(x)?;
        let shift: f64 = (0..x.len()).map(|i| self.perturbation(xi, i) * x[i]).sum();
        Ok(base + shift)
    }

    fn sample_subgradient_into(&self, x: &[f64], xi: Sample, out: &mut [f64]) -> Result<()> {
        self.full_subgradient_into(x, out)?;
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.perturbation(xi, i);
        }
        Ok(())
    }

    fn objective(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let quad: f64 = x.iter().zip(self.spectrum.iter()).map(|(v, a)| a * v * v).sum();
        Ok(quad + dot(&self.linear, x))
    }

    fn full_subgradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        for i in 0..x.len() {
            out[i] = 2.0 * self.spectrum[i] * x[i] + self.linear[i];
        }
        Ok(())
    }

    fn closed_form_prox(&self, x: &[f64], zeta: f64, metric: &[f64]) -> Option<Result<Vec<f64>>> {
        if matches!(self.regularizer, Regularizer::Ball { .. }) {
            return None;
        }
        Some(separable_prox(self, x, zeta, metric))
    }
}

// Per coordinate: minimize a·y² + b·y + h(y) with a = Aᵢ + mᵢ/(2ζ), b = cᵢ − mᵢxᵢ/ζ.
fn separable_prox(q: &Quadratic, x: &[f64], zeta: f64, metric: &[f64]) -> Result<Vec<f64>> {
    check_dim(q.dim(), x.len())?;
    check_dim(q.dim(), metric.len())?;
    let mut out = vec![0.0; x.len()];
    for i in 0..x.len() {
        let a = q.spectrum[i] + metric[i] / (2.0 * zeta);
        if a <= 0.0 {
            return Err(Error::Precondition(format!(
                "prox subproblem is not strongly convex in coordinate {i}"
            )));
        }
        let b = q.linear[i] - metric[i] * x[i] / zeta;
        let unconstrained = -b / (2.0 * a);
        out[i] = match &q.regularizer {
            Regularizer::Zero => unconstrained,
            Regularizer::L1 { weight } => soft_threshold(-b, *weight) / (2.0 * a),
            Regularizer::Box { lower, upper } => unconstrained.clamp(lower[i], upper[i]),
            Regularizer::Ball { .. } => unreachable!("ball has no separable prox"),
        };
    }
    Ok(out)
}
