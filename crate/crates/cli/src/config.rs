//! Run configuration: a TOML document with a top level and one section per
//! experiment. Unknown keys are rejected.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ptmatch_core::procgen::ProcessModel;
use ptmatch_core::score::ScoreFn;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Generate,
    Rate,
    Wait,
    Rare,
    Clt,
    Validate,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Generate => "generate",
            Self::Rate => "rate",
            Self::Wait => "wait",
            Self::Rare => "rare",
            Self::Clt => "clt",
            Self::Validate => "validate",
        };
        f.write_str(s)
    }
}

/// A threshold written either as a number or as a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Theta {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl Theta {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Scalar(v) => vec![*v],
            Self::Vector(v) => v.clone(),
        }
    }
}

/// Serde through the canonical text form.
mod text {
    use super::*;

    pub fn serialize<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<T, D::Error>
    where
        T: FromStr,
        T::Err: fmt::Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// Template process.
    #[serde(with = "text")]
    pub x: ProcessModel,
    /// Data process.
    #[serde(with = "text")]
    pub y: ProcessModel,
    pub f: ScoreFn,
    pub theta: Theta,
    /// Length, in mean spacings, of the sampled template behind the
    /// distance law of non-Poisson templates.
    pub empirical_points: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            x: ProcessModel::poisson(1.0),
            y: ProcessModel::poisson(1.0),
            f: "indicator(0.25)".parse().expect("valid"),
            theta: Theta::Scalar(1.0),
            empirical_points: 1e5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMode {
    Exact,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaitSection {
    pub l: Vec<f64>,
    pub replicates: u32,
    pub mode: ScanMode,
    /// Grid spacing (grid mode only).
    pub step: f64,
    /// Horizon `horizon_c * exp(l * rate)`.
    pub horizon_c: f64,
    pub horizon_cap: Option<f64>,
}

impl Default for WaitSection {
    fn default() -> Self {
        Self {
            l: vec![10.0, 20.0, 30.0, 40.0],
            replicates: 200,
            mode: ScanMode::Exact,
            step: 0.01,
            horizon_c: 50.0,
            horizon_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RareSection {
    pub l: Vec<f64>,
    pub n_samples: u64,
    /// Templates per window length.
    pub replicates: u32,
    /// Plain Monte Carlo draws for a cross-check on each first template;
    /// 0 skips it.
    pub naive_samples: u64,
}

impl Default for RareSection {
    fn default() -> Self {
        Self {
            l: vec![10.0, 20.0, 30.0, 40.0, 60.0],
            n_samples: 100_000,
            replicates: 10,
            naive_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CltSection {
    pub l: f64,
    pub replicates: u32,
    /// Draws for the Monte Carlo check of the variance constant; 0 skips it.
    pub mc_samples: u64,
}

impl Default for CltSection {
    fn default() -> Self {
        Self {
            l: 400.0,
            replicates: 2000,
            mc_samples: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSection {
    /// Window `[0, l)`.
    pub l: f64,
    pub replicates: u32,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            l: 10.0,
            replicates: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Must match the subcommand when given.
    pub command: Option<Command>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub model: ModelSection,
    pub wait: WaitSection,
    pub rare: RareSection,
    pub clt: CltSection,
    pub generate: GenerateSection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn field(name: &str, msg: impl fmt::Display) -> ConfigError {
    ConfigError(format!("{name}: {msg}"))
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field(name, format!("must be positive and finite, got {v}")))
    }
}

fn ladder(name: &str, ls: &[f64]) -> Result<(), ConfigError> {
    if ls.is_empty() {
        return Err(field(name, "must list at least one window length"));
    }
    for &l in ls {
        positive(name, l)?;
    }
    if ls.windows(2).any(|w| w[0] >= w[1]) {
        return Err(field(name, "window lengths must be strictly ascending"));
    }
    Ok(())
}

/// Parses and range-checks a configuration.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        m.x.validate().map_err(|e| field("model.x", e))?;
        m.y.validate().map_err(|e| field("model.y", e))?;
        let theta = m.theta.values();
        if theta.len() != m.f.dim() {
            return Err(field(
                "model.theta",
                format!("has {} components, model.f has {}", theta.len(), m.f.dim()),
            ));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(field("model.theta", "must be finite"));
        }
        positive("model.empirical_points", m.empirical_points)?;

        let w = &self.wait;
        ladder("wait.l", &w.l)?;
        positive("wait.step", w.step)?;
        positive("wait.horizon_c", w.horizon_c)?;
        if let Some(cap) = w.horizon_cap {
            if !(cap >= 0.0 && cap.is_finite()) {
                return Err(field(
                    "wait.horizon_cap",
                    format!("must be finite and >= 0, got {cap}"),
                ));
            }
        }

        let r = &self.rare;
        ladder("rare.l", &r.l)?;
        if r.n_samples < 2 {
            return Err(field(
                "rare.n_samples",
                format!("must be at least 2, got {}", r.n_samples),
            ));
        }

        positive("clt.l", self.clt.l)?;
        if self.clt.mc_samples != 0 && self.clt.mc_samples < 200 {
            return Err(field(
                "clt.mc_samples",
                format!("must be 0 or at least 200, got {}", self.clt.mc_samples),
            ));
        }
        positive("generate.l", self.generate.l)?;
        Ok(())
    }

    /// Checks that apply to one command only.
    pub fn validate_for(&self, command: Command) -> Result<(), ConfigError> {
        if let Some(c) = self.command {
            if c != command {
                return Err(field(
                    "command",
                    format!("config is for `{c}`, invoked as `{command}`"),
                ));
            }
        }
        let m = &self.model;
        let poisson_data = matches!(m.y, ProcessModel::HomogeneousPoisson { .. });
        match command {
            Command::Wait if self.wait.mode == ScanMode::Exact => {
                if !(m.f.is_scalar() && m.f.is_piecewise_linear()) {
                    return Err(field(
                        "wait.mode",
                        format!("exact scans need a scalar piecewise-linear f, got {}", m.f),
                    ));
                }
            }
            Command::Rare => {
                if !m.f.is_scalar() {
                    return Err(field(
                        "model.f",
                        "rare-event estimates need a scalar score function",
                    ));
                }
                if !poisson_data {
                    return Err(field(
                        "model.y",
                        "rare-event estimates need unmarked Poisson data",
                    ));
                }
            }
            Command::Clt => {
                if !(m.f.is_scalar() && m.f.is_continuous()) {
                    return Err(field(
                        "model.f",
                        format!("needs a continuous scalar score function, got {}", m.f),
                    ));
                }
                if !matches!(m.x, ProcessModel::HomogeneousPoisson { .. }) {
                    return Err(field("model.x", "needs a Poisson template process"));
                }
                if !poisson_data {
                    return Err(field("model.y", "needs unmarked Poisson data"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Shown by `--help`.
pub const CONFIG_HELP: &str = "\
Configuration (TOML; every key optional, unknown keys rejected):

  command = \"wait\"            must match the subcommand if present
  seed = 0                     master seed (overridden by --seed)
  out = \"out\"                  output directory (overridden by PTMATCH_OUT, then --out)

  [model]
  x = \"poisson(1)\"             template process: poisson(r), marked_poisson(r, {q: p, ...}),
                               renewal(exp(r) | uniform(a, b) | gamma(k, r) | discrete({v: p, ...}))
  y = \"poisson(1)\"             data process
  f = \"indicator(0.25)\"        score function; components separated by ';'
  theta = 1.0                  threshold, a number or a list (one per component)
  empirical_points = 1e5       spacings sampled for non-Poisson template distance laws

  [wait]
  l = [10, 20, 30, 40]
  replicates = 200
  mode = \"exact\"               or \"grid\"
  step = 0.01                  grid spacing
  horizon_c = 50.0             horizon = horizon_c * exp(l * rate)
  # horizon_cap = 1e6

  [rare]
  l = [10, 20, 30, 40, 60]
  n_samples = 100000
  replicates = 10
  naive_samples = 0            plain Monte Carlo cross-check on replicate 0

  [clt]
  l = 400
  replicates = 2000
  mc_samples = 0               Monte Carlo check of the variance constant

  [generate]
  l = 10
  replicates = 1
";
