//! Strict JSON run configuration.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lundberg::ModelParams;
use crate::pide::DEFAULT_GRID;
use crate::simulate::{Horizon, SimConfig, Strategy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config is not valid UTF-8: {0}")]
    Encoding(String),
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {message}")]
    Invariant { path: String, message: String },
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Encoding(_) => "encoding",
            ConfigError::Schema { .. } => "schema",
            ConfigError::Invariant { .. } => "invariant",
        }
    }

    /// Key path of the offending entry, when known.
    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Encoding(_) => None,
            ConfigError::Schema { path, .. } | ConfigError::Invariant { path, .. } => Some(path),
        }
    }

    fn invariant(path: &str, message: impl ToString) -> Self {
        ConfigError::Invariant { path: path.into(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?} (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub n_grid: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { n_grid: DEFAULT_GRID }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeName {
    SmallDelta,
    LargeT,
    LargeLambda,
    SmallRho,
    LargeDelta,
    SmallT,
}

impl FromStr for RegimeName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_"))).map_err(|_| {
            format!("unknown regime {s:?} (expected small_delta, large_t, large_lambda, small_rho, large_delta or small_t)")
        })
    }
}

impl RegimeName {
    /// Default five-point sweep.
    pub fn default_sweep(&self) -> Vec<f64> {
        match self {
            RegimeName::SmallDelta => vec![0.1, 0.03, 0.01, 0.003, 0.001],
            RegimeName::LargeT => vec![5.0, 10.0, 20.0, 40.0, 80.0],
            RegimeName::LargeLambda => vec![5.0, 10.0, 20.0, 50.0, 100.0],
            RegimeName::SmallRho => vec![0.1, 0.03, 0.01, 0.003, 0.001],
            RegimeName::LargeDelta => vec![1.0, 3.0, 10.0, 30.0, 100.0],
            RegimeName::SmallT => vec![0.81, 0.27, 0.09, 0.03, 0.01],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    #[serde(alias = "M")]
    pub level: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeConfig {
    pub name: Option<RegimeName>,
    pub sweep: Option<Vec<f64>>,
    /// Initial surplus; the model's `x0` when absent.
    pub x: Option<f64>,
    /// `i`, `ii` or `iii` for `large_lambda`; `exact` or `ratio` for `small_rho`.
    pub case: Option<String>,
    /// Horizon for the finite-horizon cases.
    pub horizon: Option<f64>,
    /// Simulate the threshold-yield strategy instead, where supported.
    pub threshold: Option<ThresholdConfig>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    /// Each subcommand has its own default when absent.
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "ModelParams::canonical")]
    pub model: ModelParams,
    #[serde(default)]
    pub strategy: Option<Strategy>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub regime: RegimeConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelParams::canonical(),
            strategy: None,
            sim: SimConfig::default(),
            solver: SolverConfig::default(),
            regime: RegimeConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Checks every invariant not enforced by the schema.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate().map_err(|e| match e {
            crate::lundberg::ModelError::Invalid { field, message } => {
                ConfigError::invariant(&format!("model.{field}"), message)
            }
        })?;
        if let Some(s) = &self.strategy {
            s.validate(&self.model).map_err(|e| ConfigError::invariant("strategy", e))?;
        }
        if self.sim.n_paths == 0 {
            return Err(ConfigError::invariant("sim.n_paths", "must be >= 1"));
        }
        self.sim.horizon.validate().map_err(|e| ConfigError::invariant("sim.horizon", e))?;
        if self.solver.n_grid < 2 {
            return Err(ConfigError::invariant("solver.n_grid", format!("must be >= 2 (got {})", self.solver.n_grid)));
        }
        if let Some(x) = self.regime.x {
            if !(x.is_finite() && x > 0.0) {
                return Err(ConfigError::invariant("regime.x", format!("must be > 0 (got {x})")));
            }
        }
        if let Some(t) = self.regime.horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(ConfigError::invariant("regime.horizon", format!("must be > 0 (got {t})")));
            }
        }
        if let Some(sweep) = &self.regime.sweep {
            let up = sweep.windows(2).all(|w| w[1] > w[0]);
            let down = sweep.windows(2).all(|w| w[1] < w[0]);
            if sweep.is_empty() || !(up || down) || sweep.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError::invariant("regime.sweep", "must be a nonempty strictly monotone list of finite values"));
            }
        }
        Ok(())
    }
}

fn from_json<'de, T: Deserialize<'de>>(text: &'de [u8]) -> Result<T, ConfigError> {
    let text = std::str::from_utf8(text).map_err(|e| ConfigError::Encoding(e.to_string()))?;
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut *de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::Schema { path: if path == "." { "$".into() } else { path }, message: e.into_inner().to_string() }
    })?;
    de.end().map_err(|e| ConfigError::Schema { path: "$".into(), message: e.to_string() })?;
    Ok(value)
}

/// Parses and validates a run configuration.
pub fn parse_config(text: &[u8]) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = from_json(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses a strategy given as a JSON object and validates it against `m`.
pub fn parse_strategy(text: &[u8], m: &ModelParams) -> Result<Strategy, ConfigError> {
    let s: Strategy = from_json(text)?;
    s.validate(m).map_err(|e| ConfigError::invariant("strategy", e))?;
    Ok(s)
}

/// `inf` (or `infinite`) for the truncated infinite horizon, otherwise a positive time.
pub fn parse_horizon(text: &str) -> Result<Horizon, ConfigError> {
    let text = text.trim();
    if matches!(text, "inf" | "infinite" | "Inf" | "infinity") {
        return Ok(Horizon::infinite());
    }
    let t: f64 = text
        .parse()
        .map_err(|_| ConfigError::invariant("horizon", format!("expected a time or \"inf\" (got {text:?})")))?;
    if t.is_infinite() && t > 0.0 {
        return Ok(Horizon::infinite());
    }
    let h = Horizon::Finite { t };
    h.validate().map_err(|e| ConfigError::invariant("horizon", e))?;
    Ok(h)
}
