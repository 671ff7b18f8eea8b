//! The moment accumulators `(m, υ, v̂)` shared by the first- and zeroth-order
//! methods, and the named presets of the Adam/AMSGrad family.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::numeric::Vector;

/// Initial `v̂` used when neither the caller nor the problem supplies one.
pub const DEFAULT_VHAT_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Beta1Mode {
    Constant,
    /// `β₁,ₜ = β₁·π^{t−1}`, clamped to `β₁` at `t = 0`.
    Geometric { pi: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySchedule {
    pub beta1: f64,
    pub beta1_mode: Beta1Mode,
    pub beta2: f64,
    pub beta3: f64,
}

impl DecaySchedule {
    pub fn new(beta1: f64, beta1_mode: Beta1Mode, beta2: f64, beta3: f64) -> Result<Self> {
        for (name, value) in [("beta1", beta1), ("beta2", beta2), ("beta3", beta3)] {
            if !(0.0..1.0).contains(&value) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1), got {value}"
                )));
            }
        }
        if let Beta1Mode::Geometric { pi } = beta1_mode {
            if !(pi > 0.0 && pi < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "geometric decay pi must lie in (0, 1), got {pi}"
                )));
            }
        }
        let schedule = DecaySchedule {
            beta1,
            beta1_mode,
            beta2,
            beta3,
        };
        if beta2 > 0.0 && schedule.tau() >= 1.0 {
            log::warn!(
                "beta1/sqrt(beta2) = {} is not below 1; convergence bounds do not apply",
                schedule.tau()
            );
        }
        Ok(schedule)
    }

    pub fn constant(beta1: f64, beta2: f64, beta3: f64) -> Result<Self> {
        DecaySchedule::new(beta1, Beta1Mode::Constant, beta2, beta3)
    }

    pub fn beta1_at(&self, t: usize) -> f64 {
        match self.beta1_mode {
            Beta1Mode::Constant => self.beta1,
            Beta1Mode::Geometric { pi } => {
                let exponent = t.saturating_sub(1).min(i32::MAX as usize) as i32;
                self.beta1 * pi.powi(exponent)
            }
        }
    }

    /// `τ = β₁/√β₂`. With `β₂ = 0` this is 0 when `β₁ = 0` and `+∞` otherwise.
    pub fn tau(&self) -> f64 {
        if self.beta2 > 0.0 {
            self.beta1 / self.beta2.sqrt()
        } else if self.beta1 == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// How `v̂` is formed from `υ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccumulatorMode {
    /// `v̂ₜ = β₃v̂ₜ₋₁ + (1−β₃)max(v̂ₜ₋₁, υₜ)`
    Ema,
    /// `v̂ₜ = υₜ + q`: plain Adam/RMSProp without the max correction. The
    /// floor `q` keeps `v̂` strictly positive. Not covered by the convergence
    /// theory.
    PassThrough,
    /// `mₜ = gₜ`, `v̂ₜ = q`: the SGD reduction.
    Identity,
}

impl AccumulatorMode {
    pub fn default_floor(self) -> f64 {
        match self {
            AccumulatorMode::Identity => 1.0,
            _ => DEFAULT_VHAT_FLOOR,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmaConfig {
    pub schedule: DecaySchedule,
    pub mode: AccumulatorMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "FEMA1")]
    Fema1,
    #[serde(rename = "FEMA2")]
    Fema2,
    #[serde(rename = "FEMA3")]
    Fema3,
    #[serde(rename = "AMSGrad")]
    AmsGrad,
    #[serde(rename = "RMSProp")]
    RmsProp,
    Adam,
    #[serde(rename = "SGD")]
    Sgd,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fema1,
        Preset::Fema2,
        Preset::Fema3,
        Preset::AmsGrad,
        Preset::RmsProp,
        Preset::Adam,
        Preset::Sgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fema1 => "FEMA1",
            Preset::Fema2 => "FEMA2",
            Preset::Fema3 => "FEMA3",
            Preset::AmsGrad => "AMSGrad",
            Preset::RmsProp => "RMSProp",
            Preset::Adam => "Adam",
            Preset::Sgd => "SGD",
        }
    }

    pub fn config(self) -> EmaConfig {
        let (beta1, beta2, beta3, mode) = match self {
            Preset::Fema1 => (0.9, 0.0, 0.0, AccumulatorMode::Ema),
            Preset::Fema2 | Preset::AmsGrad => (0.9, 0.999, 0.0, AccumulatorMode::Ema),
            Preset::Fema3 => (0.9, 0.999, 0.9, AccumulatorMode::Ema),
            Preset::RmsProp => (0.0, 0.999, 0.0, AccumulatorMode::PassThrough),
            Preset::Adam => (0.9, 0.999, 0.0, AccumulatorMode::PassThrough),
            Preset::Sgd => (0.0, 0.0, 0.0, AccumulatorMode::Identity),
        };
        EmaConfig {
            schedule: DecaySchedule {
                beta1,
                beta1_mode: Beta1Mode::Constant,
                beta2,
                beta3,
            },
            mode,
        }
    }
}

pub fn preset(name: &str) -> Result<EmaConfig> {
    Ok(name.parse::<Preset>()?.config())
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accumulator state after `t` updates. Serializes to a checkpoint snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmaState {
    m: Vector,
    v: Vector,
    v_hat: Vector,
    t: usize,
    mode: AccumulatorMode,
    floor: Vector,
}

impl EmaState {
    /// `m₋₁ = υ₋₁ = 0`, `v̂₋₁ = q`.
    pub fn new(q: Vector, mode: AccumulatorMode) -> Result<Self> {
        if let Some(i) = q.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial v_hat entry {i} must be strictly positive, got {}",
                q[i]
            )));
        }
        let d = q.len();
        Ok(EmaState {
            m: Vector::zeros(d),
            v: Vector::zeros(d),
            v_hat: q.clone(),
            t: 0,
            mode,
            floor: q,
        })
    }

    pub fn with_default_floor(dim: usize, mode: AccumulatorMode) -> Self {
        let q = Vector::from_checked(vec![mode.default_floor(); dim]);
        EmaState::new(q, mode).expect("default floor is positive")
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn m(&self) -> &Vector {
        &self.m
    }

    pub fn v(&self) -> &Vector {
        &self.v
    }

    pub fn v_hat(&self) -> &Vector {
        &self.v_hat
    }

    pub fn floor(&self) -> &Vector {
        &self.floor
    }

    /// Number of updates applied so far; the next update uses `β₁,ₜ` at this `t`.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn mode(&self) -> AccumulatorMode {
        self.mode
    }

    /// Applies one update with gradient `g`, in place.
    pub fn update(&mut self, g: &[f64], schedule: &DecaySchedule) -> Result<()> {
        check_dim(self.dim(), g.len())?;
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient entry {i}")));
        }
        let m = self.m.as_mut_slice();
        match self.mode {
            AccumulatorMode::Identity => {
                m.copy_from_slice(g);
            }
            AccumulatorMode::Ema | AccumulatorMode::PassThrough => {
                let b1 = schedule.beta1_at(self.t);
                let b2 = schedule.beta2;
                let b3 = schedule.beta3;
                let v = self.v.as_mut_slice();
                let v_hat = self.v_hat.as_mut_slice();
                for i in 0..g.len() {
                    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                    v_hat[i] = if self.mode == AccumulatorMode::Ema {
                        b3 * v_hat[i] + (1.0 - b3) * v_hat[i].max(v[i])
                    } else {
                        v[i] + self.floor[i]
                    };
                }
                if v_hat.iter().any(|x| !x.is_finite()) || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("second-moment accumulator".into()));
                }
            }
        }
        self.t += 1;
        Ok(())
    }
}

/// Functional form of [`EmaState::update`].
pub fn ema_update(state: &EmaState, g: &Vector, schedule: &DecaySchedule) -> Result<EmaState> {
    let mut next = state.clone();
    next.update(g, schedule)?;
    Ok(next)
}
