//! Dense vectors and the diagonal scaled geometry used throughout the crate.
//!
//! A [`Vector`] never holds NaN or infinite entries: every constructor and
//! arithmetic operation validates its output and reports [`Error::NonFinite`]
//! instead of letting a bad value propagate into an optimizer.

use std::fmt;
use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A dense real vector with finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector entry {i}")));
        }
        Ok(Vector(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Result<Self> {
        Vector::new(vec![value; dim])
    }

    /// Wraps entries the caller has already checked, re-validating in debug builds.
    pub(crate) fn from_checked(entries: Vec<f64>) -> Self {
        debug_assert!(entries.iter().all(|v| v.is_finite()));
        Vector(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Mutable access for in-place kernels; callers must restore finiteness
    /// or report an error before the vector escapes.
    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dim(self.len(), other.len())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn scale(&self, factor: f64) -> Result<Vector> {
        Vector::new(self.0.iter().map(|v| v * factor).collect())
    }

    /// Returns `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &Vector) -> Result<Vector> {
        check_dim(self.len(), other.len())?;
        Vector::new(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + factor * b)
                .collect(),
        )
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Vector> {
        Vector::new(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn elementwise(&self, other: &Vector, op: ElementwiseOp) -> Result<Vector> {
        elementwise(self, other, op)
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        elementwise(self, other, ElementwiseOp::Add)
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        elementwise(self, other, ElementwiseOp::Sub)
    }

    pub fn mul(&self, other: &Vector) -> Result<Vector> {
        elementwise(self, other, ElementwiseOp::Mul)
    }

    pub fn div(&self, other: &Vector) -> Result<Vector> {
        elementwise(self, other, ElementwiseOp::Div)
    }

    pub fn max(&self, other: &Vector) -> Result<Vector> {
        elementwise(self, other, ElementwiseOp::Max)
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Vector {
    type Error = Error;

    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Vector::new(entries)
    }
}

impl From<Vector> for Vec<f64> {
    fn from(v: Vector) -> Self {
        v.0
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    Div,
    Max,
}

/// Coordinatewise binary operation on equal-length vectors.
pub fn elementwise(a: &Vector, b: &Vector, op: ElementwiseOp) -> Result<Vector> {
    check_dim(a.len(), b.len())?;
    if op == ElementwiseOp::Div {
        if let Some(i) = b.iter().position(|&v| v == 0.0) {
            return Err(Error::DivisionByZero(i));
        }
    }
    let out = a
        .iter()
        .zip(b.iter())
        .map(|(&x, &y)| match op {
            ElementwiseOp::Add => x + y,
            ElementwiseOp::Sub => x - y,
            ElementwiseOp::Mul => x * y,
            ElementwiseOp::Div => x / y,
            ElementwiseOp::Max => x.max(y),
        })
        .collect();
    Vector::new(out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exponent applied to the metric diagonal inside a scaled norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormPower {
    /// `‖Q^{1/2} x‖²`
    Half,
    /// `‖Q^{1/4} x‖²`
    Quarter,
}

/// Elementwise powers of the metric diagonal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricPower {
    Half,
    Quarter,
    NegHalf,
    NegQuarter,
}

impl MetricPower {
    fn apply(self, q: f64) -> f64 {
        match self {
            MetricPower::Half => q.sqrt(),
            MetricPower::Quarter => q.sqrt().sqrt(),
            MetricPower::NegHalf => 1.0 / q.sqrt(),
            MetricPower::NegQuarter => 1.0 / q.sqrt().sqrt(),
        }
    }
}

/// Positive diagonal matrix `Q = diag(q)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vector", into = "Vector")]
pub struct DiagonalMetric {
    q: Vector,
}

impl DiagonalMetric {
    pub fn new(q: Vector) -> Result<Self> {
        if let Some(i) = q.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "metric entry {i} is {} but must be strictly positive",
                q[i]
            )));
        }
        Ok(DiagonalMetric { q })
    }

    pub fn from_vec(q: Vec<f64>) -> Result<Self> {
        DiagonalMetric::new(Vector::new(q)?)
    }

    pub fn identity(dim: usize) -> Self {
        DiagonalMetric {
            q: Vector::from_checked(vec![1.0; dim]),
        }
    }

    pub fn uniform(dim: usize, value: f64) -> Result<Self> {
        DiagonalMetric::new(Vector::filled(dim, value)?)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn diag(&self) -> &Vector {
        &self.q
    }

    pub fn pow(&self, power: MetricPower) -> Vector {
        Vector::from_checked(self.q.iter().map(|&v| power.apply(v)).collect())
    }

    /// Elementwise square root as a metric, e.g. `V̂^{1/2}` from `V̂`.
    pub fn sqrt(&self) -> DiagonalMetric {
        DiagonalMetric {
            q: self.pow(MetricPower::Half),
        }
    }

    pub fn min(&self) -> f64 {
        self.q.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_uniform(&self) -> bool {
        self.q.iter().all(|&v| v == self.q[0])
    }
}

impl TryFrom<Vector> for DiagonalMetric {
    type Error = Error;

    fn try_from(q: Vector) -> Result<Self> {
        DiagonalMetric::new(q)
    }
}

impl From<DiagonalMetric> for Vector {
    fn from(m: DiagonalMetric) -> Self {
        m.q
    }
}

/// `Σᵢ qᵢ^{2p} xᵢ²` for `p ∈ {1/2, 1/4}`.
pub fn scaled_norm_sq(x: &Vector, metric: &DiagonalMetric, power: NormPower) -> Result<f64> {
    check_dim(metric.dim(), x.len())?;
    Ok(scaled_norm_sq_slice(x, metric.diag(), power))
}

pub(crate) fn scaled_norm_sq_slice(x: &[f64], q: &[f64], power: NormPower) -> f64 {
    match power {
        NormPower::Half => x.iter().zip(q).map(|(v, w)| w * v * v).sum(),
        NormPower::Quarter => x.iter().zip(q).map(|(v, w)| w.sqrt() * v * v).sum(),
    }
}
