//! Zeroth-order gradient estimation from two function values.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};
use crate::numeric::Vector;
use crate::problems::{CompositeProblem, Sample};
use crate::rng::StreamRng;

const UNIT_NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionLaw {
    #[default]
    UnitSphere,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub mu: f64,
    #[serde(default)]
    pub direction_law: DirectionLaw,
}

impl SmoothingConfig {
    pub fn new(mu: f64) -> Result<Self> {
        check_mu(mu)?;
        Ok(SmoothingConfig {
            mu,
            direction_law: DirectionLaw::UnitSphere,
        })
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "smoothing radius must be positive, got {mu}"
        )))
    }
}

/// Uniform direction on the unit sphere in `ℝ^d` (normalized Gaussian).
pub fn sample_direction(dim: usize, rng: &mut StreamRng) -> Result<Vector> {
    if dim == 0 {
        return Err(Error::InvalidParameter("direction dimension must be ≥ 1".into()));
    }
    let mut out = vec![0.0; dim];
    sample_direction_into(&mut out, rng);
    Ok(Vector::from_checked(out))
}

pub(crate) fn sample_direction_into(out: &mut [f64], rng: &mut StreamRng) {
    loop {
        let mut norm_sq = 0.0;
        for v in out.iter_mut() {
            *v = rng.standard_normal();
            norm_sq += *v * *v;
        }
        if norm_sq > 0.0 {
            let inv = 1.0 / norm_sq.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// Uniform point in the unit ball: a sphere direction scaled by `U^{1/d}`.
pub fn sample_ball(dim: usize, rng: &mut StreamRng) -> Result<Vector> {
    let direction = sample_direction(dim, rng)?;
    let radius = rng.uniform().powf(1.0 / dim as f64);
    direction.scale(radius)
}

/// `(d/μ)(F(x + μu) − F(x))·u` from exactly two calls to `value`.
pub fn estimate_gradient<F>(value: F, x: &Vector, u: &Vector, mu: f64) -> Result<Vector>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_dim(x.len(), u.len())?;
    let norm = u.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::InvalidParameter(format!(
            "direction must have unit norm, got {norm}"
        )));
    }
    let mut scratch = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    estimate_gradient_into(value, x, u, mu, &mut scratch, &mut out)?;
    Vector::new(out)
}

pub(crate) fn estimate_gradient_into<F>(
    mut value: F,
    x: &[f64],
    u: &[f64],
    mu: f64,
    scratch: &mut [f64],
    out: &mut [f64],
) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_mu(mu)?;
    for i in 0..x.len() {
        scratch[i] = x[i] + mu * u[i];
    }
    let shifted = check_finite(value(scratch)?, "value oracle")?;
    let base = check_finite(value(x)?, "value oracle")?;
    let coef = x.len() as f64 / mu * (shifted - base);
    check_finite(coef, "two-point estimator")?;
    for i in 0..x.len() {
        out[i] = coef * u[i];
    }
    Ok(())
}

/// Two-point estimate for a problem's sample oracle at sample `xi`.
pub fn estimate_problem_gradient<P: CompositeProblem + ?Sized>(
    problem: &P,
    x: &Vector,
    xi: Sample,
    u: &Vector,
    mu: f64,
) -> Result<Vector> {
    check_dim(problem.dim(), x.len())?;
    estimate_gradient(|z| problem.sample_value(z, xi), x, u, mu)
}

/// Monte Carlo oracles used only by tests and diagnostics.
pub mod reference {
    use serde::{Deserialize, Serialize};

    use super::sample_ball;
    use crate::error::{Error, Result};
    use crate::numeric::Vector;
    use crate::rng::StreamRng;

    #[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
    pub struct MonteCarloEstimate {
        pub mean: f64,
        pub std_error: f64,
    }

    impl MonteCarloEstimate {
        pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Result<Self> {
            let mut count = 0usize;
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for s in samples {
                count += 1;
                let delta = s - mean;
                mean += delta / count as f64;
                m2 += delta * (s - mean);
            }
            if count == 0 {
                return Err(Error::InvalidParameter("need at least one sample".into()));
            }
            let variance = if count > 1 { m2 / (count - 1) as f64 } else { 0.0 };
            Ok(MonteCarloEstimate {
                mean,
                std_error: (variance / count as f64).sqrt(),
            })
        }

        /// True when `value` lies within `k` standard errors of the mean.
        pub fn agrees_with(&self, value: f64, k: f64) -> bool {
            (self.mean - value).abs() <= k * self.std_error
        }
    }

    /// Monte Carlo `f_μ(x) = E_w f(x + μw)` with `w` uniform in the unit ball.
    pub fn smoothed_value(
        f: impl Fn(&[f64]) -> f64,
        x: &Vector,
        mu: f64,
        n_samples: usize,
        rng: &mut StreamRng,
    ) -> Result<MonteCarloEstimate> {
        if n_samples == 0 || !(mu > 0.0) {
            return Err(Error::InvalidParameter(
                "smoothed value needs n_samples ≥ 1 and mu > 0".into(),
            ));
        }
        let mut point = vec![0.0; x.len()];
        let mut values = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let w = sample_ball(x.len(), rng)?;
            for i in 0..x.len() {
                point[i] = x[i] + mu * w[i];
            }
            values.push(f(&point));
        }
        MonteCarloEstimate::from_samples(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    fn v(entries: &[f64]) -> Vector {
        Vector::new(entries.to_vec()).unwrap()
    }

    #[test]
    fn linear_estimator_is_exact_and_mu_free() {
        let c = [1.0, -2.0, 0.5];
        let f = |z: &[f64]| Ok(z.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>());
        let x = v(&[0.3, 0.1, -0.4]);
        let mut rng = StreamRng::from_seed(4, Purpose::Direction);
        let u = sample_direction(3, &mut rng).unwrap();
        let cu: f64 = c.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
        for mu in [1e-3, 0.1, 10.0] {
            let g = estimate_gradient(f, &x, &u, mu).unwrap();
            for i in 0..3 {
                assert!((g[i] - 3.0 * cu * u[i]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn one_dimensional_hand_example() {
        let g = estimate_gradient(|z: &[f64]| Ok(3.0 * z[0]), &v(&[0.0]), &v(&[-1.0]), 0.5).unwrap();
        assert_eq!(g.as_slice(), &[3.0]);
    }

    #[test]
    fn constant_function_gives_zero_with_two_calls() {
        let mut calls = 0;
        let g = estimate_gradient(
            |_: &[f64]| {
                calls += 1;
                Ok(7.0)
            },
            &v(&[1.0, 2.0]),
            &v(&[0.6, 0.8]),
            0.1,
        )
        .unwrap();
        assert_eq!(calls, 2);
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = |_: &[f64]| Ok(0.0);
        assert!(estimate_gradient(f, &v(&[0.0, 0.0]), &v(&[1.0, 1.0]), 0.1).is_err());
        assert!(estimate_gradient(f, &v(&[0.0]), &v(&[1.0]), 0.0).is_err());
        assert!(matches!(
            estimate_gradient(|_: &[f64]| Ok(f64::NAN), &v(&[0.0]), &v(&[1.0]), 0.1),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn directions_are_unit_and_one_dimensional_signs_balance() {
        let mut rng = StreamRng::from_seed(8, Purpose::Direction);
        for d in [1, 2, 7, 50] {
            let u = sample_direction(d, &mut rng).unwrap();
            assert!((u.norm() - 1.0).abs() <= 1e-12);
        }
        let plus = (0..10_000)
            .filter(|_| sample_direction(1, &mut rng).unwrap()[0] > 0.0)
            .count();
        // Binomial(10⁴, ½): 4σ = 200.
        assert!((plus as i64 - 5000).abs() <= 200);
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = StreamRng::from_seed(8, Purpose::Direction);
        for _ in 0..1000 {
            assert!(sample_ball(4, &mut rng).unwrap().norm() <= 1.0);
        }
    }

    #[test]
    fn smoothed_linear_function_is_unchanged() {
        let mut rng = StreamRng::from_seed(2, Purpose::Direction);
        let x = v(&[0.5, -1.0]);
        let est = reference::smoothed_value(|z| 2.0 * z[0] - z[1], &x, 0.3, 20_000, &mut rng).unwrap();
        assert!(est.agrees_with(2.0, 3.0), "{est:?}");
    }
}
