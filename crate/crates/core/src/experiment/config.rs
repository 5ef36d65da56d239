use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::direct::DirectSettings;
use crate::error::{invalid, Error, Result};
use crate::estimator::{GradientConfig, NoiseConfig};
use crate::kinematics::JacobianMethod;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Uniform random configurations, recursive least squares.
    #[default]
    RandomRls,
    /// Uniform random configurations, stochastic gradient.
    RandomGradient,
    /// A-optimal configurations, recursive least squares.
    ActiveRls,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::RandomRls, Strategy::RandomGradient, Strategy::ActiveRls];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::RandomRls => "random_rls",
            Strategy::RandomGradient => "random_gradient",
            Strategy::ActiveRls => "active_rls",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| invalid(format!("unknown strategy '{s}'")))
    }
}

fn default_prior_variance() -> f64 {
    0.01
}
fn default_w_spread() -> f64 {
    0.1
}
fn default_v_spread() -> f64 {
    0.03
}

/// Where the initial estimate is drawn from.
///
/// With `bounds` set, each parameter is uniform in its own `[lo, hi]`.
/// Otherwise the hypercube is centered on the truth with half-widths
/// `w_spread` (axis components) and `v_spread` (moment components, m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    /// σ²₀ in `P₀ = σ²₀ I`.
    #[serde(default = "default_prior_variance")]
    pub prior_variance: f64,
    #[serde(default = "default_w_spread")]
    pub w_spread: f64,
    #[serde(default = "default_v_spread")]
    pub v_spread: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            prior_variance: default_prior_variance(),
            w_spread: default_w_spread(),
            v_spread: default_v_spread(),
            bounds: None,
        }
    }
}

fn default_exclusion_radius() -> f64 {
    0.05
}

/// Settings of the active strategy beyond the optimizer itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveSettings {
    /// Max-norm radius (rad) around configurations that produced no
    /// measurement, inside which candidates count as unobservable.
    #[serde(default = "default_exclusion_radius")]
    pub exclusion_radius: f64,
}

impl Default for ActiveSettings {
    fn default() -> Self {
        Self {
            exclusion_radius: default_exclusion_radius(),
        }
    }
}

fn default_orientation_threshold() -> f64 {
    0.05
}
fn default_location_threshold() -> f64 {
    0.02
}

/// Error levels that count as converged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Radians.
    #[serde(default = "default_orientation_threshold")]
    pub orientation: f64,
    /// Meters.
    #[serde(default = "default_location_threshold")]
    pub location: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            orientation: default_orientation_threshold(),
            location: default_location_threshold(),
        }
    }
}

fn default_chain() -> String {
    "planar3".to_string()
}
fn default_iterations() -> usize {
    300
}
fn default_seeds() -> Vec<u64> {
    (1..=20).collect()
}
fn default_probe_set_size() -> usize {
    100
}
fn default_probe_seed() -> u64 {
    0x5eed
}

/// One experiment: a chain, a strategy and a list of seeds.
///
/// `noise.obs_variance` is used both by the simulated sensor and by the
/// estimator's measurement model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in fixture name or path to a chain file.
    #[serde(default = "default_chain")]
    pub chain: String,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub optimizer: DirectSettings,
    #[serde(default)]
    pub active: ActiveSettings,
    #[serde(default)]
    pub gradient: GradientConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub jacobian: JacobianMethod,
    #[serde(default = "default_probe_set_size")]
    pub probe_set_size: usize,
    /// Seed of the held-out probe set, shared by all runs.
    #[serde(default = "default_probe_seed")]
    pub probe_seed: u64,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Store wall-clock selection times in the records. Record files written
    /// with this on are not byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text` after applying `key.path=value` overrides.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        Self::parse_with_overrides(&std::fs::read_to_string(path)?, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |m: &str| Err(Error::Config(m.to_string()));
        if self.iterations == 0 {
            return cfg_err("iterations must be at least 1");
        }
        if self.seeds.is_empty() {
            return cfg_err("at least one seed is required");
        }
        if self.probe_set_size == 0 {
            return cfg_err("probe_set_size must be at least 1");
        }
        if self.chain.trim().is_empty() {
            return cfg_err("chain must name a fixture or a file");
        }
        self.noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.gradient.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.optimizer.max_evaluations == 0 || !(self.optimizer.epsilon >= 0.0 && self.optimizer.epsilon.is_finite()) {
            return cfg_err("optimizer needs a positive budget and finite epsilon >= 0");
        }
        let i = &self.init;
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite_nonneg(i.prior_variance) && finite_nonneg(i.w_spread) && finite_nonneg(i.v_spread)) {
            return cfg_err("init spreads and prior variance must be finite and non-negative");
        }
        match &i.bounds {
            Some(b) if b.iter().any(|[lo, hi]| !(lo.is_finite() && hi.is_finite() && lo < hi)) => {
                return cfg_err("init bounds must satisfy lo < hi");
            }
            None if i.w_spread == 0.0 && i.v_spread == 0.0 => {
                return cfg_err("init hypercube is degenerate");
            }
            _ => {}
        }
        if !(self.active.exclusion_radius.is_finite() && self.active.exclusion_radius >= 0.0) {
            return cfg_err("active.exclusion_radius must be finite and non-negative");
        }
        let t = &self.thresholds;
        if !(t.orientation > 0.0 && t.location > 0.0) {
            return cfg_err("thresholds must be positive");
        }
        Ok(())
    }
}

/// Sets `a.b.c = value` in a TOML table. The value is read as a TOML literal
/// and falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').map(str::trim).collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override '{spec}' has an empty key")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{spec}': '{p}' is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}
