//! Experiment configuration: a TOML file with `[problem]`, `[algorithms]`,
//! `[grid]` and `[run]` sections. Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::accumulators::{EmaConfig, Preset};
use crate::error::{Error, Result};
use crate::moreau::DEFAULT_MAX_ITER;
use crate::regularizer::Regularizer;

/// Algorithms available to the harness. The numeric code keys the random
/// streams, so it never depends on the order of the configured list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "FEMA1")]
    Fema1,
    #[serde(rename = "FEMA2")]
    Fema2,
    #[serde(rename = "FEMA3")]
    Fema3,
    #[serde(rename = "SGD")]
    Sgd,
    #[serde(rename = "ZEMA1")]
    Zema1,
    #[serde(rename = "ZEMA2")]
    Zema2,
    #[serde(rename = "ZEMA3")]
    Zema3,
    #[serde(rename = "ZSGD")]
    Zsgd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::Fema1,
        Algorithm::Fema2,
        Algorithm::Fema3,
        Algorithm::Sgd,
        Algorithm::Zema1,
        Algorithm::Zema2,
        Algorithm::Zema3,
        Algorithm::Zsgd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fema1 => "FEMA1",
            Algorithm::Fema2 => "FEMA2",
            Algorithm::Fema3 => "FEMA3",
            Algorithm::Sgd => "SGD",
            Algorithm::Zema1 => "ZEMA1",
            Algorithm::Zema2 => "ZEMA2",
            Algorithm::Zema3 => "ZEMA3",
            Algorithm::Zsgd => "ZSGD",
        }
    }

    pub fn code(self) -> u16 {
        Algorithm::ALL.iter().position(|a| *a == self).unwrap() as u16 + 1
    }

    pub fn is_zeroth_order(self) -> bool {
        matches!(
            self,
            Algorithm::Zema1 | Algorithm::Zema2 | Algorithm::Zema3 | Algorithm::Zsgd
        )
    }

    pub fn ema(self) -> EmaConfig {
        let preset = match self {
            Algorithm::Fema1 | Algorithm::Zema1 => Preset::Fema1,
            Algorithm::Fema2 | Algorithm::Zema2 => Preset::Fema2,
            Algorithm::Fema3 | Algorithm::Zema3 => Preset::Fema3,
            Algorithm::Sgd | Algorithm::Zsgd => Preset::Sgd,
        };
        preset.config()
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('-', "");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(&key))
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    PhaseRetrieval {
        d: usize,
        n: usize,
        #[serde(default)]
        regularizer: Regularizer,
    },
    Quadratic {
        spectrum: Vec<f64>,
        linear: Vec<f64>,
        noise: f64,
        epoch_length: usize,
        #[serde(default)]
        regularizer: Regularizer,
    },
}

impl ProblemConfig {
    pub fn regularizer(&self) -> &Regularizer {
        match self {
            ProblemConfig::PhaseRetrieval { regularizer, .. } | ProblemConfig::Quadratic { regularizer, .. } => {
                regularizer
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    #[serde(default = "default_spacing")]
    pub spacing: Spacing,
}

fn default_spacing() -> Spacing {
    Spacing::Linear
}

impl GridConfig {
    /// Grid points in increasing order, both endpoints included.
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i + 1 == self.count {
                    return self.max;
                }
                let frac = i as f64 / last;
                match self.spacing {
                    Spacing::Linear => self.min + frac * (self.max - self.min),
                    Spacing::Log => (self.min.ln() + frac * (self.max.ln() - self.min.ln())).exp(),
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuRule {
    /// `μ = 10/√(T+1)`
    PaperExperiment,
    /// `μ = d/√(T+1)`
    Corollary,
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `αₜ = α`
    Constant,
    /// `αₜ = α/√(T+1)`
    ConstantOverSqrtT,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub epochs: usize,
    pub repetitions: usize,
    pub master_seed: u64,
    #[serde(default = "default_mu_rule")]
    pub mu_rule: MuRule,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_step_rule")]
    pub step_rule: StepRule,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_moreau_max_iter")]
    pub moreau_max_iter: usize,
    #[serde(default)]
    pub save_traces: bool,
    /// Constant initial `v̂₋₁`; defaults to the problem metric, then the floor.
    #[serde(default)]
    pub initial_vhat: Option<f64>,
}

fn default_mu_rule() -> MuRule {
    MuRule::PaperExperiment
}

fn default_step_rule() -> StepRule {
    StepRule::ConstantOverSqrtT
}

fn default_moreau_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub algorithms: Vec<Algorithm>,
    pub grid: GridConfig,
    pub run: RunConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    algorithms: RawAlgorithms,
    grid: GridConfig,
    run: RunConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    kind: String,
    d: Option<usize>,
    n: Option<usize>,
    spectrum: Option<Vec<f64>>,
    linear: Option<Vec<f64>>,
    noise: Option<f64>,
    epoch_length: Option<usize>,
    /// Constraint `‖x‖ ≤ r` (projected variants).
    ball_radius: Option<f64>,
    /// Penalty `λ‖x‖₁` (proximal variants).
    l1_weight: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlgorithms {
    list: Vec<String>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let problem = raw.problem.resolve()?;
        let mut algorithms = Vec::with_capacity(raw.algorithms.list.len());
        for name in &raw.algorithms.list {
            let a: Algorithm = name.parse()?;
            if algorithms.contains(&a) {
                return Err(Error::Config(format!("algorithm `{name}` listed twice")));
            }
            algorithms.push(a);
        }
        let config = ExperimentConfig {
            problem,
            algorithms,
            grid: raw.grid,
            run: raw.run,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("[algorithms] list is empty".into()));
        }
        let g = &self.grid;
        if g.count == 0 {
            return Err(Error::Config("[grid] count must be ≥ 1".into()));
        }
        if !(g.min > 0.0 && g.max.is_finite()) {
            return Err(Error::Config("[grid] stepsizes must be positive and finite".into()));
        }
        if g.count > 1 && !(g.min < g.max) {
            return Err(Error::Config(format!(
                "[grid] min = {} must be below max = {}",
                g.min, g.max
            )));
        }
        if g.count > u16::MAX as usize {
            return Err(Error::Config("[grid] count too large".into()));
        }
        let r = &self.run;
        if r.epochs == 0 || r.repetitions == 0 {
            return Err(Error::Config("[run] epochs and repetitions must be ≥ 1".into()));
        }
        if r.repetitions > u16::MAX as usize {
            return Err(Error::Config("[run] repetitions too large".into()));
        }
        if let Some(q) = r.initial_vhat {
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::Config(format!("[run] initial_vhat must be positive, got {q}")));
            }
        }
        if r.moreau_max_iter == 0 {
            return Err(Error::Config("[run] moreau_max_iter must be ≥ 1".into()));
        }
        match (r.mu_rule, r.mu) {
            (MuRule::Explicit, Some(mu)) if mu > 0.0 && mu.is_finite() => {}
            (MuRule::Explicit, _) => {
                return Err(Error::Config(
                    "[run] mu_rule = \"explicit\" needs a positive mu".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::Config(
                    "[run] mu is only allowed with mu_rule = \"explicit\"".into(),
                ))
            }
            _ => {}
        }
        self.epoch_length()
            .checked_mul(r.epochs)
            .ok_or_else(|| Error::Config("epochs × epoch length overflows".into()))?;
        Ok(())
    }

    /// Oracle draws per epoch.
    pub fn epoch_length(&self) -> usize {
        match &self.problem {
            ProblemConfig::PhaseRetrieval { n, .. } => *n,
            ProblemConfig::Quadratic { epoch_length, .. } => *epoch_length,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.problem {
            ProblemConfig::PhaseRetrieval { d, .. } => *d,
            ProblemConfig::Quadratic { spectrum, .. } => spectrum.len(),
        }
    }

    /// `T` such that iterations `0..=T` make exactly `epochs × n` draws.
    pub fn horizon(&self) -> usize {
        self.run.epochs * self.epoch_length() - 1
    }

    pub fn mu(&self) -> f64 {
        let steps = (self.horizon() as f64 + 1.0).sqrt();
        match self.run.mu_rule {
            MuRule::PaperExperiment => 10.0 / steps,
            MuRule::Corollary => self.dim() as f64 / steps,
            MuRule::Explicit => self.run.mu.expect("validated"),
        }
    }
}

impl RawProblem {
    fn regularizer(&self) -> Result<Regularizer> {
        let bad = |e: Error| Error::Config(format!("[problem] {e}"));
        match (self.ball_radius, self.l1_weight) {
            (Some(_), Some(_)) => Err(Error::Config(
                "[problem] ball_radius and l1_weight are mutually exclusive".into(),
            )),
            (Some(r), None) => Regularizer::ball(r).map_err(bad),
            (None, Some(w)) => Regularizer::l1(w).map_err(bad),
            (None, None) => Ok(Regularizer::Zero),
        }
    }

    fn resolve(self) -> Result<ProblemConfig> {
        let regularizer = self.regularizer()?;
        let unexpected = |names: &[(&str, bool)]| -> Result<()> {
            if let Some((name, _)) = names.iter().find(|(_, present)| *present) {
                return Err(Error::Config(format!(
                    "[problem] key `{name}` does not apply to kind `{}`",
                    self.kind
                )));
            }
            Ok(())
        };
        match self.kind.as_str() {
            "phase_retrieval" => {
                unexpected(&[
                    ("spectrum", self.spectrum.is_some()),
                    ("linear", self.linear.is_some()),
                    ("noise", self.noise.is_some()),
                    ("epoch_length", self.epoch_length.is_some()),
                ])?;
                let d = self.d.ok_or_else(|| Error::Config("[problem] missing `d`".into()))?;
                let n = self.n.ok_or_else(|| Error::Config("[problem] missing `n`".into()))?;
                if d == 0 || n == 0 {
                    return Err(Error::Config("[problem] d and n must be ≥ 1".into()));
                }
                Ok(ProblemConfig::PhaseRetrieval { d, n, regularizer })
            }
            "quadratic" => {
                unexpected(&[("d", self.d.is_some()), ("n", self.n.is_some())])?;
                let spectrum = self
                    .spectrum
                    .ok_or_else(|| Error::Config("[problem] missing `spectrum`".into()))?;
                let linear = self.linear.unwrap_or_else(|| vec![0.0; spectrum.len()]);
                if spectrum.is_empty() || linear.len() != spectrum.len() {
                    return Err(Error::Config(
                        "[problem] spectrum and linear must be nonempty and of equal length".into(),
                    ));
                }
                if spectrum.iter().chain(&linear).any(|v| !v.is_finite()) {
                    return Err(Error::Config("[problem] quadratic entries must be finite".into()));
                }
                let noise = self.noise.unwrap_or(0.0);
                if !(noise >= 0.0 && noise.is_finite()) {
                    return Err(Error::Config("[problem] noise must be nonnegative".into()));
                }
                let epoch_length = self.epoch_length.unwrap_or(1);
                if epoch_length == 0 {
                    return Err(Error::Config("[problem] epoch_length must be ≥ 1".into()));
                }
                Ok(ProblemConfig::Quadratic {
                    spectrum,
                    linear,
                    noise,
                    epoch_length,
                    regularizer,
                })
            }
            other => Err(Error::Config(format!("[problem] unknown kind `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[problem]
kind = "phase_retrieval"
d = 3
n = 20

[algorithms]
list = ["FEMA1", "SGD"]

[grid]
count = 3
min = 0.001
max = 0.1

[run]
epochs = 2
repetitions = 1
master_seed = 7
"#;

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(c.algorithms, vec![Algorithm::Fema1, Algorithm::Sgd]);
        assert_eq!(c.horizon(), 39);
        assert_eq!(c.grid.points(), vec![0.001, 0.0505, 0.1]);
        assert_eq!(c.run.step_rule, StepRule::ConstantOverSqrtT);
        assert!((c.mu() - 10.0 / 40f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = MINIMAL.replace("epochs = 2", "epochs = 2\nlearning_rate = 3");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
        let text = MINIMAL.replace("n = 20", "n = 20\nnoise = 0.1");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
        let text = format!("{MINIMAL}\n[extra]\nx = 1\n");
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_are_errors() {
        for (from, to) in [
            ("min = 0.001", "min = 0.5"),
            ("count = 3", "count = 0"),
            ("repetitions = 1", "repetitions = 0"),
            ("\"SGD\"", "\"Nadam\""),
            ("kind = \"phase_retrieval\"", "kind = \"lasso\""),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{from} -> {to}");
        }
    }

    #[test]
    fn regularizer_keys() {
        let text = MINIMAL.replace("n = 20", "n = 20\nball_radius = 2.0");
        let c = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(c.problem.regularizer(), &Regularizer::Ball { radius: 2.0 });
        let text = MINIMAL.replace("n = 20", "n = 20\nball_radius = 2.0\nl1_weight = 0.1");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = MINIMAL.replace("n = 20", "n = 20\nl1_weight = -1");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn log_grid() {
        let g = GridConfig {
            count: 3,
            min: 0.01,
            max: 1.0,
            spacing: Spacing::Log,
        };
        let p = g.points();
        assert!((p[1] - 0.1).abs() < 1e-15 && p[2] == 1.0 && p[0] == 0.01, "{p:?}");
    }

    #[test]
    fn algorithm_codes_are_distinct() {
        let mut codes: Vec<u16> = Algorithm::ALL.iter().map(|a| a.code()).collect();
        codes.dedup();
        assert_eq!(codes.len(), 8);
        assert_eq!("z-sgd".parse::<Algorithm>().unwrap(), Algorithm::Zsgd);
    }
}
