//! Flat `key=value` run configs.
//!
//! ```text
//! problem=cosine_mixture
//! dim=8
//! method=oqn
//! budget=960
//! seed=7
//! p_fail=0.01
//! audit=full
//! gap_bound=12.0
//! ```
//!
//! Blank lines and `#` comments are ignored. `OQN_SEED` overrides `seed`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use oqn_core::oqn::{AuditLevel, HyperParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SEED_ENV: &str = "OQN_SEED";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("bad value for `{key}`: `{value}`")]
    BadValue { key: String, value: String },
    #[error("invalid explicit parameters: {0}")]
    Params(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Oqn,
    OgBaseline,
    GdBaseline,
}

impl FromStr for Method {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "oqn" => Ok(Method::Oqn),
            "og" | "og_baseline" => Ok(Method::OgBaseline),
            "gd" | "gd_baseline" => Ok(Method::GdBaseline),
            _ => Err(()),
        }
    }
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Oqn => "oqn",
            Method::OgBaseline => "og_baseline",
            Method::GdBaseline => "gd_baseline",
        }
    }
}

pub fn parse_audit(s: &str) -> Option<AuditLevel> {
    match s {
        "off" => Some(AuditLevel::Off),
        "episode" => Some(AuditLevel::Episode),
        "full" => Some(AuditLevel::Full),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamsMode {
    Auto,
    Explicit(HyperParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: String,
    pub dim: usize,
    pub problem_seed: u64,
    pub method: Method,
    /// `M` for the conversion methods, step count for gradient descent.
    pub budget: usize,
    pub params: ParamsMode,
    pub seed: u64,
    pub p_fail: f64,
    pub gap_bound: Option<f64>,
    pub audit: AuditLevel,
    pub eps_target: Option<f64>,
    /// Gradient-descent step; defaults to `1/L1`.
    pub step_size: Option<f64>,
    pub csv: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub events: Option<PathBuf>,
    /// Record wall time in the report (breaks bit-identical reports).
    pub record_time: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: "cosine_mixture".into(),
            dim: 8,
            problem_seed: 0,
            method: Method::Oqn,
            budget: 960,
            params: ParamsMode::Auto,
            seed: 0,
            p_fail: 0.01,
            gap_bound: None,
            audit: AuditLevel::Episode,
            eps_target: None,
            step_size: None,
            csv: None,
            report: None,
            events: None,
            record_time: false,
        }
    }
}

const KEYS: &[&str] = &[
    "problem", "dim", "problem_seed", "method", "budget", "seed", "p_fail", "gap_bound", "audit", "eps_target",
    "step_size", "params", "d_radius", "eta", "t_len", "k_eps", "delta_tr", "csv", "report", "events", "record_time",
];

/// Parses `key=value` lines into a map, rejecting duplicates.
pub fn parse_pairs(text: &str, allowed: &[&str]) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
        let (k, v) = (k.trim(), v.trim());
        if !allowed.contains(&k) {
            return Err(ConfigError::UnknownKey(k.to_string()));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(ConfigError::Duplicate(k.to_string()));
        }
    }
    Ok(map)
}

pub(crate) fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| ConfigError::BadValue { key: key.to_string(), value: v.clone() }),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let map = parse_pairs(text, KEYS)?;
        let mut c = RunConfig {
            problem: map.get("problem").cloned().ok_or(ConfigError::Missing("problem"))?,
            dim: get(&map, "dim")?.ok_or(ConfigError::Missing("dim"))?,
            ..Default::default()
        };
        if let Some(v) = get(&map, "problem_seed")? {
            c.problem_seed = v;
        }
        if let Some(m) = map.get("method") {
            c.method = m.parse().map_err(|_| ConfigError::BadValue { key: "method".into(), value: m.clone() })?;
        }
        c.budget = get(&map, "budget")?.ok_or(ConfigError::Missing("budget"))?;
        if let Some(v) = get(&map, "seed")? {
            c.seed = v;
        }
        if let Some(v) = get(&map, "p_fail")? {
            c.p_fail = v;
        }
        c.gap_bound = get(&map, "gap_bound")?;
        if let Some(a) = map.get("audit") {
            c.audit = parse_audit(a).ok_or_else(|| ConfigError::BadValue { key: "audit".into(), value: a.clone() })?;
        }
        c.eps_target = get(&map, "eps_target")?;
        c.step_size = get(&map, "step_size")?;
        c.csv = map.get("csv").map(PathBuf::from);
        c.report = map.get("report").map(PathBuf::from);
        c.events = map.get("events").map(PathBuf::from);
        c.record_time = get(&map, "record_time")?.unwrap_or(false);
        c.params = match map.get("params").map(String::as_str).unwrap_or("auto") {
            "auto" => ParamsMode::Auto,
            "explicit" => {
                let need = |k: &'static str| -> Result<f64, ConfigError> { get(&map, k)?.ok_or(ConfigError::Missing(k)) };
                let t: usize = get(&map, "t_len")?.ok_or(ConfigError::Missing("t_len"))?;
                let k: usize = get(&map, "k_eps")?.ok_or(ConfigError::Missing("k_eps"))?;
                let p = HyperParams::manual(need("d_radius")?, need("eta")?, t, k, need("delta_tr")?, c.p_fail)
                    .map_err(|e| ConfigError::Params(e.to_string()))?;
                ParamsMode::Explicit(p)
            }
            other => return Err(ConfigError::BadValue { key: "params".into(), value: other.to_string() }),
        };
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), msg: e.to_string() })?;
        Self::parse(&text)
    }

    /// Applies `OQN_SEED` when set.
    pub fn with_env_seed(mut self) -> Result<Self, ConfigError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::BadValue { key: SEED_ENV.into(), value: v.clone() })?;
        }
        Ok(self)
    }
}
