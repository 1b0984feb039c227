//! Experiment configuration: a single JSON document naming the game, the
//! network model, the method and every schedule/noise constant.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::annealing::Method;
use crate::error::{Error, Result};
use crate::game::EvRanges;
use crate::noise::NoiseModel;
use crate::schedule::ScheduleSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    /// The two-agent quadratic game with targets (2, 3).
    Quadratic,
    EvCharging {
        seed: u64,
        #[serde(default = "default_coefficients")]
        coefficient_range: (f64, f64),
        #[serde(default = "default_sensitivity")]
        sensitivity_range: (f64, f64),
    },
    DoubleWell {
        tilt: f64,
    },
}

fn default_coefficients() -> (f64, f64) {
    EvRanges::default().coefficients
}

fn default_sensitivity() -> (f64, f64) {
    EvRanges::default().sensitivity
}

impl GameSpec {
    pub fn agents(&self) -> usize {
        match self {
            GameSpec::Quadratic => 2,
            GameSpec::EvCharging { .. } => 10,
            GameSpec::DoubleWell { .. } => 1,
        }
    }

    pub fn default_init_box(&self) -> (f64, f64) {
        match self {
            GameSpec::Quadratic => (-5.0, 5.0),
            GameSpec::EvCharging { .. } => (0.0, 24.0),
            GameSpec::DoubleWell { .. } => (0.9, 1.1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkMode {
    /// Uniform draws from a fixed Erdős–Rényi pool.
    Pool,
    /// A fresh Erdős–Rényi graph every iteration.
    Fresh,
    Complete,
    /// One fixed graph given by `edges`.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub mode: NetworkMode,
    pub n: usize,
    #[serde(default = "default_pool_size")]
    pub pool_size: usize,
    #[serde(default = "default_p_range")]
    pub p_range: (f64, f64),
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<(usize, usize)>>,
    /// Clamp `β^k` to `0.49 / max degree` of the model.
    #[serde(default = "default_true")]
    pub beta_clamp: bool,
}

fn default_pool_size() -> usize {
    50
}

fn default_p_range() -> (f64, f64) {
    (0.1, 0.2)
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Auto,
    Grid,
    Multistart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "default_oracle_method")]
    pub method: OracleMethod,
    /// Per-coordinate search box; defaults to the game's init box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub search_box: Option<(f64, f64)>,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_oracle_method() -> OracleMethod {
    OracleMethod::Auto
}
fn default_resolution() -> f64 {
    0.01
}
fn default_starts() -> usize {
    200
}
fn default_budget() -> usize {
    5000
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            method: OracleMethod::Auto,
            search_box: None,
            resolution: default_resolution(),
            starts: default_starts(),
            budget: default_budget(),
            seed: 0,
        }
    }
}

/// Reference point and radius for ensemble basin fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub reference: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    pub game: GameSpec,
    pub network: NetworkSpec,
    pub method: Method,
    /// Second method for `compare`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_with: Option<Method>,
    pub schedule: ScheduleSet,
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_box: Option<(f64, f64)>,
    pub horizon: usize,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub seed: u64,
    /// `τ` used for the weighted consensus diagnostic.
    #[serde(default = "default_diagnostic_tau")]
    pub diagnostic_tau: f64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub oracle: OracleSpec,
}

fn default_stride() -> usize {
    1
}
fn default_replicates() -> usize {
    1
}
fn default_diagnostic_tau() -> f64 {
    0.2
}
fn default_output_dir() -> String {
    "out".into()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::config(json_field(&e), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn init_box(&self) -> (f64, f64) {
        self.init_box.unwrap_or_else(|| self.game.default_init_box())
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.noise.gradient.validate()?;
        if self.horizon < 1 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.record_stride < 1 {
            return Err(Error::config("record_stride", "must be at least 1"));
        }
        if self.replicates < 1 {
            return Err(Error::config("replicates", "must be at least 1"));
        }
        let bound = 0.5 - self.schedule.tau_beta;
        if !(self.diagnostic_tau >= 0.0 && self.diagnostic_tau < bound) {
            return Err(Error::config(
                "diagnostic_tau",
                format!("must lie in [0, 1/2 - tau_beta) = [0, {bound}), got {}", self.diagnostic_tau),
            ));
        }
        let (lo, hi) = self.init_box();
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::config("init_box", format!("invalid box [{lo}, {hi}]")));
        }
        let net = &self.network;
        if net.n != self.game.agents() {
            return Err(Error::config(
                "network.n",
                format!("game has {} agents but network has {} nodes", self.game.agents(), net.n),
            ));
        }
        let needs_graph = self.method != Method::Centralized || self.compare_with.is_some_and(|m| m != Method::Centralized);
        if needs_graph && net.n < 2 {
            return Err(Error::config("network.n", "distributed methods need at least 2 agents"));
        }
        let (p_lo, p_hi) = net.p_range;
        if !(0.0..=1.0).contains(&p_lo) || !(0.0..=1.0).contains(&p_hi) || p_lo > p_hi {
            return Err(Error::config("network.p_range", format!("[{p_lo}, {p_hi}] is not a probability range")));
        }
        if net.mode == NetworkMode::Pool && net.pool_size < 1 {
            return Err(Error::config("network.pool_size", "must be at least 1"));
        }
        if net.mode == NetworkMode::Single && net.edges.is_none() {
            return Err(Error::config("network.edges", "required for single-graph mode"));
        }
        if let GameSpec::EvCharging {
            coefficient_range: (a, b),
            sensitivity_range: (c, d),
            ..
        } = self.game
        {
            if !(a < b) {
                return Err(Error::config("game.coefficient_range", format!("[{a}, {b}] is empty")));
            }
            if !(c < d) {
                return Err(Error::config("game.sensitivity_range", format!("({c}, {d}) is empty")));
            }
        }
        if let Some(ens) = &self.ensemble {
            if ens.reference.len() != self.game.agents() {
                return Err(Error::config(
                    "ensemble.reference",
                    format!("expected {} coordinates, got {}", self.game.agents(), ens.reference.len()),
                ));
            }
            if !(ens.radius > 0.0) {
                return Err(Error::config("ensemble.radius", "must be positive"));
            }
        }
        if !(self.oracle.resolution > 0.0) {
            return Err(Error::config("oracle.resolution", "must be positive"));
        }
        if self.oracle.starts < 1 {
            return Err(Error::config("oracle.starts", "must be at least 1"));
        }
        Ok(())
    }
}

fn json_field(err: &serde_json::Error) -> String {
    let msg = err.to_string();
    for marker in ["unknown field `", "missing field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(name) = rest.split('`').next() {
                return name.to_string();
            }
        }
    }
    format!("line {} column {}", err.line(), err.column())
}
