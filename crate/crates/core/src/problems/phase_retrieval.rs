//! Robust phase retrieval: `f(x) = (1/n) Σᵢ |⟨aᵢ, x⟩² − bᵢ|`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_index, kink_sign, CompositeProblem, Lipschitz, Sample, SampleSpace};
use crate::error::{check_dim, Error, Result};
use crate::numeric::{dot, Vector};
use crate::regularizer::Regularizer;
use crate::rng::{Purpose, RunId, StreamKey, StreamRng};
use crate::zoo::sample_direction;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRetrieval {
    dim: usize,
    seed: u64,
    /// Measurements stored row-major, `n × d`.
    a: Vec<f64>,
    b: Vec<f64>,
    x_star: Vector,
    rho: f64,
    regularizer: Regularizer,
    lipschitz: Option<Lipschitz>,
}

/// Gaussian measurements `aᵢ ~ N(0, I)`, signal `x*` uniform on the unit
/// sphere and noiseless targets `bᵢ = ⟨aᵢ, x*⟩²`, all from the data stream
/// of `seed`.
pub fn generate_phase_retrieval(dim: usize, n: usize, seed: u64) -> Result<PhaseRetrieval> {
    let mut rng = StreamRng::from_seed(seed, Purpose::Data);
    generate_with(dim, n, seed, &mut rng)
}

pub(crate) fn generate_with(
    dim: usize,
    n: usize,
    seed: u64,
    rng: &mut StreamRng,
) -> Result<PhaseRetrieval> {
    if dim == 0 || n == 0 {
        return Err(Error::InvalidParameter(format!(
            "phase retrieval needs d ≥ 1 and n ≥ 1, got d={dim}, n={n}"
        )));
    }
    let x_star = sample_direction(dim, rng)?;
    let mut a = Vec::with_capacity(n * dim);
    let mut b = Vec::with_capacity(n);
    for _ in 0..n {
        let start = a.len();
        a.extend((0..dim).map(|_| rng.standard_normal()));
        let inner = dot(&a[start..], &x_star);
        b.push(inner * inner);
    }
    PhaseRetrieval::build(dim, seed, a, b, x_star)
}

impl PhaseRetrieval {
    pub fn from_parts(rows: Vec<Vector>, b: Vec<f64>, x_star: Vector, seed: u64) -> Result<Self> {
        let dim = x_star.len();
        check_dim(rows.len(), b.len())?;
        let mut a = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            check_dim(dim, row.len())?;
            a.extend_from_slice(row);
        }
        PhaseRetrieval::build(dim, seed, a, b, x_star)
    }

    fn build(dim: usize, seed: u64, a: Vec<f64>, b: Vec<f64>, x_star: Vector) -> Result<Self> {
        if dim == 0 || b.is_empty() {
            return Err(Error::InvalidParameter("empty phase retrieval instance".into()));
        }
        if let Some(i) = b.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "target b_{i} = {} must be finite and nonnegative",
                b[i]
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("phase retrieval measurements".into()));
        }
        let n = b.len();
        let rho = 2.0 * a.iter().map(|v| v * v).sum::<f64>() / n as f64;
        Ok(PhaseRetrieval {
            dim,
            seed,
            a,
            b,
            x_star,
            rho,
            regularizer: Regularizer::Zero,
            lipschitz: None,
        })
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.dim..(i + 1) * self.dim]
    }

    pub fn targets(&self) -> &[f64] {
        &self.b
    }

    pub fn ground_truth(&self) -> &Vector {
        &self.x_star
    }

    pub fn with_regularizer(mut self, regularizer: Regularizer) -> Self {
        self.regularizer = regularizer;
        self
    }

    pub fn with_lipschitz(mut self, lipschitz: Lipschitz) -> Self {
        self.lipschitz = Some(lipschitz);
        self
    }

    /// Starting point uniform on the unit sphere, from the init stream.
    pub fn initial_point(&self, master_seed: u64, run: RunId) -> Result<Vector> {
        let mut rng = StreamRng::new(StreamKey::new(master_seed, run, Purpose::Init));
        sample_direction(self.dim, &mut rng)
    }

    /// Sampled supremum of `‖G(x, ξ)‖` over points in the box `[−R, R]^d`.
    /// The sample oracle has no global Lipschitz constant, so the result is
    /// flagged as an estimate.
    pub fn estimate_lipschitz(&self, radius: f64, samples: usize, rng: &mut StreamRng) -> Result<Lipschitz> {
        if !(radius > 0.0 && samples > 0) {
            return Err(Error::InvalidParameter(
                "lipschitz estimate needs a positive radius and sample count".into(),
            ));
        }
        let mut x = vec![0.0; self.dim];
        let mut g = vec![0.0; self.dim];
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            x.iter_mut()
                .for_each(|v| *v = radius * (2.0 * rng.uniform() - 1.0));
            let xi = self.draw_sample(rng);
            self.sample_subgradient_into(&x, xi, &mut g)?;
            best = best.max(dot(&g, &g).sqrt());
        }
        Ok(Lipschitz {
            value: best,
            estimated: true,
        })
    }

    fn residual(&self, x: &[f64], i: usize) -> (f64, f64) {
        let inner = dot(self.row(i), x);
        (inner, inner * inner - self.b[i])
    }

    /// Flat text form: a `d n seed` header, an `x_star` line, then one row of
    /// `aᵢ` entries followed by `bᵢ` per measurement. Floats use the shortest
    /// representation that parses back to the same value.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.dim, self.n(), self.seed);
        out.push_str("x_star");
        for v in self.x_star.iter() {
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
        for i in 0..self.n() {
            for v in self.row(i) {
                let _ = write!(out, "{v:?} ");
            }
            let _ = writeln!(out, "{:?}", self.b[i]);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty instance file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!(
                "instance header must be `d n seed`, got `{header}`"
            )));
        }
        let dim: usize = parse_field(fields[0], "d")?;
        let n: usize = parse_field(fields[1], "n")?;
        let seed: u64 = parse_field(fields[2], "seed")?;

        let star_line = lines
            .next()
            .ok_or_else(|| Error::Parse("missing x_star line".into()))?;
        let mut star_fields = star_line.split_whitespace();
        if star_fields.next() != Some("x_star") {
            return Err(Error::Parse("second line must start with `x_star`".into()));
        }
        let x_star: Vec<f64> = star_fields
            .map(|s| parse_field(s, "x_star entry"))
            .collect::<Result<_>>()?;
        check_dim(dim, x_star.len())?;

        let mut a = Vec::with_capacity(n * dim);
        let mut b = Vec::with_capacity(n);
        for (row, line) in lines.enumerate() {
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|s| parse_field(s, "measurement"))
                .collect::<Result<_>>()?;
            if values.len() != dim + 1 {
                return Err(Error::Parse(format!(
                    "row {row} has {} fields, expected {}",
                    values.len(),
                    dim + 1
                )));
            }
            a.extend_from_slice(&values[..dim]);
            b.push(values[dim]);
        }
        if b.len() != n {
            return Err(Error::Parse(format!(
                "header declares {n} rows but file has {}",
                b.len()
            )));
        }
        PhaseRetrieval::build(dim, seed, a, b, Vector::new(x_star)?)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PhaseRetrieval::from_text(&text)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("invalid {what} `{s}`")))
}

impl CompositeProblem for PhaseRetrieval {
    fn dim(&self) -> usize {
        self.dim
    }

    fn weak_convexity(&self) -> f64 {
        self.rho
    }

    fn sample_space(&self) -> SampleSpace {
        SampleSpace::Finite(self.n())
    }

    fn regularizer(&self) -> &Regularizer {
        &self.regularizer
    }

    fn lipschitz(&self) -> Option<Lipschitz> {
        self.lipschitz
    }

    fn sample_value(&self, x: &[f64], xi: Sample) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let i = check_index(xi, self.n())?;
        Ok(self.residual(x, i).1.abs())
    }

    fn sample_subgradient_into(&self, x: &[f64], xi: Sample, out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        let i = check_index(xi, self.n())?;
        let (inner, r) = self.residual(x, i);
        let coef = 2.0 * kink_sign(r) * inner;
        for (o, a) in out.iter_mut().zip(self.row(i)) {
            *o = coef * a;
        }
        Ok(())
    }

    fn objective(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let total: f64 = (0..self.n()).map(|i| self.residual(x, i).1.abs()).sum();
        Ok(total / self.n() as f64)
    }

    fn full_subgradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n() {
            let (inner, r) = self.residual(x, i);
            let coef = 2.0 * kink_sign(r) * inner;
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += coef * a;
            }
        }
        let n = self.n() as f64;
        out.iter_mut().for_each(|v| *v /= n);
        Ok(())
    }

    /// Zero when `x*` is feasible and `h` vanishes on it; unknown otherwise.
    fn optimal_value(&self) -> Option<f64> {
        let h = &self.regularizer;
        (h.is_zero() || (h.is_indicator() && h.contains(&self.x_star))).then_some(0.0)
    }
}
