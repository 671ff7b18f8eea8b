//! Least absolute deviations `f(x) = (1/n) Σᵢ |⟨aᵢ, x⟩ − bᵢ|`: convex,
//! nonsmooth, and with an exact prox through its box-constrained dual.

use serde::{Deserialize, Serialize};

use super::{check_index, kink_sign, CompositeProblem, Lipschitz, Sample, SampleSpace};
use crate::error::{check_dim, Error, Result};
use crate::numeric::{dot, Vector};
use crate::regularizer::Regularizer;
use crate::rng::{Purpose, StreamRng};

const DUAL_MAX_SWEEPS: usize = 100_000;
/// Relative duality gap at which the dual ascent stops. The primal error obeys
/// `‖y − y*‖²_M ≤ 2ζ·gap`.
const DUAL_GAP_TOL: f64 = 1e-15;
/// Gap accepted when the sweep budget runs out.
const DUAL_GAP_FALLBACK: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbsoluteRegression {
    dim: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    regularizer: Regularizer,
}

impl AbsoluteRegression {
    pub fn new(rows: Vec<Vector>, b: Vec<f64>) -> Result<Self> {
        check_dim(rows.len(), b.len())?;
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidParameter("regression needs d ≥ 1 and n ≥ 1".into()));
        }
        let mut a = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            check_dim(dim, row.len())?;
            a.extend_from_slice(row);
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regression targets".into()));
        }
        Ok(AbsoluteRegression {
            dim,
            a,
            b,
            regularizer: Regularizer::Zero,
        })
    }

    /// Gaussian design, Gaussian planted signal, targets `⟨aᵢ, x⟩ + noise·N(0,1)`.
    pub fn generate(dim: usize, n: usize, noise: f64, seed: u64) -> Result<Self> {
        if dim == 0 || n == 0 {
            return Err(Error::InvalidParameter("regression needs d ≥ 1 and n ≥ 1".into()));
        }
        let mut rng = StreamRng::from_seed(seed, Purpose::Data);
        let signal: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let mut rows = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
            b.push(dot(&row, &signal) + noise * rng.standard_normal());
            rows.push(Vector::new(row)?);
        }
        AbsoluteRegression::new(rows, b)
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.dim..(i + 1) * self.dim]
    }

    fn residual(&self, x: &[f64], i: usize) -> f64 {
        dot(self.row(i), x) - self.b[i]
    }

    // Dual of min_y (1/n)Σ|aᵢᵀy − bᵢ| + (1/2ζ)‖M^{1/2}(y − x)‖²:
    //   max_{|λᵢ| ≤ 1/n} λᵀ(Ax − b) − (ζ/2)‖M^{−1/2}Aᵀλ‖²,  y = x − ζM⁻¹Aᵀλ.
    // Exact coordinate ascent, tracking w = M⁻¹Aᵀλ.
    /// Box-constrained dual `max_{|λᵢ| ≤ 1/n} Σλᵢrᵢ(x) − (ζ/2)‖M⁻¹Aᵀλ‖²_M`
    /// solved by exact coordinate ascent; `y = x − ζM⁻¹Aᵀλ`.
    fn dual_prox(&self, x: &[f64], zeta: f64, metric: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        check_dim(self.dim, metric.len())?;
        let n = self.n();
        let cap = 1.0 / n as f64;
        let residuals: Vec<f64> = (0..n).map(|i| self.residual(x, i)).collect();
        let curvature: Vec<f64> = (0..n)
            .map(|i| self.row(i).iter().zip(metric).map(|(a, m)| a * a / m).sum::<f64>())
            .collect();
        let mut lambda = vec![0.0; n];
        let mut w = vec![0.0; self.dim];
        let mut y = x.to_vec();
        let mut gap = f64::INFINITY;
        for _ in 0..DUAL_MAX_SWEEPS {
            for i in 0..n {
                if curvature[i] == 0.0 {
                    continue;
                }
                let row = self.row(i);
                let slope = residuals[i] - zeta * dot(row, &w);
                let updated = (lambda[i] + slope / (zeta * curvature[i])).clamp(-cap, cap);
                let delta = updated - lambda[i];
                if delta != 0.0 {
                    lambda[i] = updated;
                    for j in 0..self.dim {
                        w[j] += delta * row[j] / metric[j];
                    }
                }
            }
            // Rebuild w from λ so rounding in the incremental updates cannot drift.
            w.iter_mut().for_each(|v| *v = 0.0);
            for (i, l) in lambda.iter().enumerate() {
                for (wj, (a, m)) in w.iter_mut().zip(self.row(i).iter().zip(metric)) {
                    *wj += l * a / m;
                }
            }
            for j in 0..self.dim {
                y[j] = x[j] - zeta * w[j];
            }
            let proximity: f64 = (0..self.dim).map(|j| metric[j] * w[j] * w[j]).sum::<f64>() * zeta / 2.0;
            let primal = (0..n).map(|i| self.residual(&y, i).abs()).sum::<f64>() / n as f64 + proximity;
            let dual = dot(&lambda, &residuals) - proximity;
            gap = primal - dual;
            if gap <= DUAL_GAP_TOL * primal.abs().max(1.0) {
                return Ok(y);
            }
        }
        let primal = self.objective(&y)?;
        if gap <= DUAL_GAP_FALLBACK * primal.abs().max(1.0) {
            return Ok(y);
        }
        Err(Error::Capability(format!(
            "dual coordinate ascent for the regression prox stalled at duality gap {gap:e}"
        )))
    }
}

impl CompositeProblem for AbsoluteRegression {
    fn dim(&self) -> usize {
        self.dim
    }

    fn weak_convexity(&self) -> f64 {
        0.0
    }

    fn sample_space(&self) -> SampleSpace {
        SampleSpace::Finite(self.n())
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn lipschitz(&self) -> Option<Lipschitz> {
        let value = (0..self.n())
            .map(|i| dot(self.row(i), self.row(i)).sqrt())
            .fold(0.0, f64::max);
        Some(Lipschitz {
            value,
            estimated: false,
        })
    }

    fn sample_value(&self, x: &[f64], xi: Sample) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let i = check_index(xi, self.n())?;
        Ok(self.residual(x, i).abs())
    }

    fn sample_subgradient_into(&self, x: &[f64], xi: Sample, out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let i = check_index(xi, self.n())?;
        let s = kink_sign(self.residual(x, i));
        for (o, a) in out.iter_mut().zip(self.row(i)) {
            *o = s * a;
        }
        Ok(())
    }

    fn objective(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let total: f64 = (0..self.n()).map(|i| self.residual(x, i).abs()).sum();
        Ok(total / self.n() as f64)
    }

    fn full_subgradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n() {
            let s = kink_sign(self.residual(x, i));
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += s * a;
            }
        }
        let n = self.n() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        Ok(())
    }

    fn closed_form_prox(&self, x: &[f64], zeta: f64, metric: &[f64]) -> Option<Result<Vec<f64>>> {
        if !self.regularizer.is_zero() {
            return None;
        }
        Some(self.dual_prox(x, zeta, metric))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_prox_is_soft_threshold() {
        // f(y) = |y| gives prox(x) = soft(x, ζ) under M = 1.
        let p = AbsoluteRegression::new(vec![Vector::new(vec![1.0]).unwrap()], vec![0.0]).unwrap();
        for (x, expected) in [(2.0, 1.0), (0.5, 0.0), (-3.0, -2.0)] {
            let y = p.closed_form_prox(&[x], 1.0, &[1.0]).unwrap().unwrap();
            assert!((y[0] - expected).abs() < 1e-14, "{x}: {}", y[0]);
        }
    }

    #[test]
    fn prox_beats_perturbations() {
        let p = AbsoluteRegression::generate(3, 12, 0.3, 4).unwrap();
        let x = [0.5, -1.0, 2.0];
        let m = [1.0, 2.5, 0.4];
        let zeta = 0.7;
        let y = p.closed_form_prox(&x, zeta, &m).unwrap().unwrap();
        let model = |z: &[f64]| {
            p.objective(z).unwrap()
                + (0..3).map(|j| m[j] * (z[j] - x[j]).powi(2)).sum::<f64>() / (2.0 * zeta)
        };
        let best = model(&y);
        let mut rng = StreamRng::from_seed(2, Purpose::Xi);
        for _ in 0..2000 {
            let scale = 10f64.powi(-(rng.index(6) as i32));
            let z: Vec<f64> = y.iter().map(|v| v + scale * rng.standard_normal()).collect();
            assert!(model(&z) >= best - 1e-13);
        }
    }
}
