//! Stochastic composite problems `ψ(x) = f(x) + h(x)` with a weakly convex
//! loss `f`, sample oracles `F(x, ξ)` and `G(x, ξ)`, and a convex `h`.

mod certificate;
mod phase_retrieval;
mod quadratic;
mod regression;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{DiagonalMetric, Vector};
use crate::regularizer::Regularizer;
use crate::rng::StreamRng;

pub use certificate::{
    hypomonotonicity_violation, subgradient_inequality_violation, weak_convexity_certificate,
    CertificateReport, PAIR_SCALES,
};
pub use phase_retrieval::{generate_phase_retrieval, PhaseRetrieval};
pub(crate) use phase_retrieval::generate_with;
pub use quadratic::{make_test_quadratic, Quadratic};
pub use regression::AbsoluteRegression;

/// Identifier of one stochastic sample `ξ`. For finite sums it is the row
/// index; streaming problems expand it into whatever randomness they need.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleSpace {
    Finite(usize),
    Streaming,
}

/// Lipschitz constant `L_F` of the sample value oracle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lipschitz {
    pub value: f64,
    /// True when the value was estimated from samples rather than known.
    pub estimated: bool,
}

pub trait CompositeProblem: Send + Sync {
    fn dim(&self) -> usize;

    /// `ρ` such that `f + (ρ/2)‖Q^{1/2}·‖²` is convex.
    fn weak_convexity(&self) -> f64;

    /// The `Q` of the weak-convexity statement; `None` means the identity.
    fn metric_q(&self) -> Option<&DiagonalMetric> {
        None
    }

    fn sample_space(&self) -> SampleSpace;

    fn regularizer(&self) -> &Regularizer;

    fn lipschitz(&self) -> Option<Lipschitz> {
        None
    }

    /// Gradient Lipschitz constant when `f` is smooth.
    fn smoothness(&self) -> Option<f64> {
        None
    }

    /// Number of oracle draws that make up one epoch.
    fn epoch_length(&self) -> usize {
        match self.sample_space() {
            SampleSpace::Finite(n) => n,
            SampleSpace::Streaming => 1,
        }
    }

    fn draw_sample(&self, rng: &mut StreamRng) -> Sample {
        match self.sample_space() {
            SampleSpace::Finite(n) => Sample(rng.index(n) as u64),
            SampleSpace::Streaming => Sample(rng.next_u64()),
        }
    }

    /// `F(x, ξ)`
    fn sample_value(&self, x: &[f64], xi: Sample) -> Result<f64>;

    /// Writes `G(x, ξ)` into `out`.
    fn sample_subgradient_into(&self, x: &[f64], xi: Sample, out: &mut [f64]) -> Result<()>;

    /// Deterministic `f(x)`.
    fn objective(&self, x: &[f64]) -> Result<f64>;

    /// Writes a deterministic element of `∂f(x)` into `out`.
    fn full_subgradient_into(&self, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(Error::Capability(
            "problem does not provide a full subgradient".into(),
        ))
    }

    /// `ψ(x) = f(x) + h(x)`
    fn composite_value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.objective(x)? + self.regularizer().value(x)?)
    }

    /// `ψ*` when known exactly.
    fn optimal_value(&self) -> Option<f64> {
        None
    }

    /// Exact `argmin_y ψ(y) + (1/2ζ)‖M^{1/2}(x − y)‖²` when the problem has a
    /// closed form (or an exact solver) for it.
    fn closed_form_prox(&self, _x: &[f64], _zeta: f64, _metric: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }
}

/// Convenience wrappers over the slice oracles.
pub trait CompositeProblemExt: CompositeProblem {
    fn value_at(&self, x: &Vector, xi: Sample) -> Result<f64> {
        crate::error::check_dim(self.dim(), x.len())?;
        self.sample_value(x, xi)
    }

    fn subgradient_at(&self, x: &Vector, xi: Sample) -> Result<Vector> {
        crate::error::check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.sample_subgradient_into(x, xi, &mut out)?;
        Vector::new(out)
    }

    fn full_subgradient(&self, x: &Vector) -> Result<Vector> {
        crate::error::check_dim(self.dim(), x.len())?;
        let mut out = vec![0.0; x.len()];
        self.full_subgradient_into(x, &mut out)?;
        Vector::new(out)
    }

    fn metric_or_identity(&self) -> DiagonalMetric {
        self.metric_q()
            .cloned()
            .unwrap_or_else(|| DiagonalMetric::identity(self.dim()))
    }
}

impl<P: CompositeProblem + ?Sized> CompositeProblemExt for P {}

pub(crate) fn check_index(xi: Sample, n: usize) -> Result<usize> {
    let index = xi.0 as usize;
    if xi.0 >= n as u64 {
        return Err(Error::IndexOutOfRange { index, n });
    }
    Ok(index)
}

/// `sign(r)` with `sign(0) = 0`.
pub(crate) fn kink_sign(r: f64) -> f64 {
    if r > 0.0 {
        1.0
    } else if r < 0.0 {
        -1.0
    } else {
        0.0
    }
}
