//! Problem configuration files.
//!
//! Two spellings of the same flat key set are accepted: a JSON object, or
//! `key = value` lines where each value is a JSON literal. `#` starts a
//! comment line in the second form.
//!
//! ```text
//! gamma = 1.4
//! r0 = 1.0
//! r1 = 0.5
//! rho0 = 1.0
//! u0 = 2.0
//! p0 = 0.7142857142857143
//! E0 = 4.0
//! b.constant = 1.0
//! ```

use std::fmt::Write as _;
use std::path::Path;

use epshock_core::ode::ToleranceConfig;
use epshock_core::{BackgroundCharge, FlowState, GasLaw, Geometry, ShockProblem64, SolverSettings64};
use serde_json::{Map, Number, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("missing required key '{0}'")]
    Missing(&'static str),
    #[error("key '{key}' must be {expected}")]
    Type { key: String, expected: &'static str },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChargeSpec {
    Constant(f64),
    Table(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub gamma: f64,
    pub r0: f64,
    pub r1: f64,
    pub rho0: f64,
    pub u0: f64,
    pub p0: f64,
    pub e0: f64,
    pub b: ChargeSpec,
    pub p_ex: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub sonic_guard: f64,
    pub tol_ts: f64,
    /// Finite-difference step as a fraction of the nozzle length.
    pub fd_step: f64,
    pub seed: u64,
    pub grid: usize,
    pub force: bool,
}

const KEYS: &[&str] = &[
    "gamma", "r0", "r1", "rho0", "u0", "p0", "E0", "b.constant", "b.table", "p_ex", "rtol", "atol", "sonic_guard",
    "tol_ts", "fd_step", "seed", "grid", "force",
];

type CoreParts = (GasLaw<f64>, Geometry<f64>, FlowState<f64>, BackgroundCharge<f64>);

impl ProblemConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Parses either accepted spelling and validates the result.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let map = if text.trim_start().starts_with('{') {
            match serde_json::from_str::<Value>(text)? {
                Value::Object(m) => m,
                _ => return Err(ConfigError::Invalid("configuration must be a JSON object".into())),
            }
        } else {
            parse_lines(text)?
        };
        let cfg = Self::from_map(&map)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_map(map: &Map<String, Value>) -> Result<Self, ConfigError> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        let b = match (map.get("b.constant"), map.get("b.table")) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Invalid("give exactly one of 'b.constant' and 'b.table'".into()))
            }
            (Some(v), None) => ChargeSpec::Constant(as_f64("b.constant", v)?),
            (None, Some(v)) => ChargeSpec::Table(as_table(v)?),
            (None, None) => return Err(ConfigError::Missing("b.constant")),
        };
        Ok(Self {
            gamma: required(map, "gamma")?,
            r0: required(map, "r0")?,
            r1: required(map, "r1")?,
            rho0: required(map, "rho0")?,
            u0: required(map, "u0")?,
            p0: required(map, "p0")?,
            e0: required(map, "E0")?,
            b,
            p_ex: map.get("p_ex").map(|v| as_f64("p_ex", v)).transpose()?,
            rtol: optional(map, "rtol", 1e-10)?,
            atol: optional(map, "atol", 1e-12)?,
            sonic_guard: optional(map, "sonic_guard", 1e-6)?,
            tol_ts: optional(map, "tol_ts", 1e-10)?,
            fd_step: optional(map, "fd_step", 1e-5)?,
            seed: match map.get("seed") {
                None => 0,
                Some(v) => v.as_u64().ok_or(ConfigError::Type { key: "seed".into(), expected: "a non-negative integer" })?,
            },
            grid: match map.get("grid") {
                None => 21,
                Some(v) => v.as_u64().ok_or(ConfigError::Type { key: "grid".into(), expected: "a positive integer" })?
                    as usize,
            },
            force: match map.get("force") {
                None => false,
                Some(v) => v.as_bool().ok_or(ConfigError::Type { key: "force".into(), expected: "a boolean" })?,
            },
        })
    }

    /// Checks the ranges of every field, including that the solver objects
    /// can be built from them.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.tol_ts > 0.0 && self.tol_ts < 1.0) {
            return bad(format!("tol_ts must lie in (0, 1), got {}", self.tol_ts));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.1) {
            return bad(format!("fd_step must lie in (0, 0.1), got {}", self.fd_step));
        }
        if !(self.sonic_guard > 0.0 && self.sonic_guard < 0.1) {
            return bad(format!("sonic_guard must lie in (0, 0.1), got {}", self.sonic_guard));
        }
        if self.grid < 2 {
            return bad(format!("grid must be at least 2, got {}", self.grid));
        }
        if let Some(p) = self.p_ex {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("p_ex must be positive, got {p}"));
            }
        }
        let (gas, _, entrance, _) = self.core_parts().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        ToleranceConfig::new(self.rtol, self.atol).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let m2 = epshock_core::gas::mach_squared(&entrance, &gas);
        if !(m2 >= 1.0 + epshock_core::radial::ENTRANCE_MARGIN) {
            return bad(format!("entrance flow must be supersonic, got M0^2 = {m2}"));
        }
        Ok(())
    }

    fn core_parts(&self) -> epshock_core::Result<CoreParts> {
        let entrance = FlowState::new(self.rho0, self.u0, self.p0, self.e0)?;
        let gas = GasLaw::new(self.gamma, self.p0 / self.rho0.powf(self.gamma))?;
        let geom = Geometry::new(self.r0, self.r1)?;
        let b = match &self.b {
            ChargeSpec::Constant(v) => BackgroundCharge::constant(*v)?,
            ChargeSpec::Table(t) => BackgroundCharge::table(t.clone())?,
        };
        Ok((gas, geom, entrance, b))
    }

    pub fn settings(&self) -> SolverSettings64 {
        SolverSettings64 {
            tol: ToleranceConfig::new(self.rtol, self.atol),
            sonic_guard: self.sonic_guard,
            ..SolverSettings64::default()
        }
    }

    pub fn background(&self) -> epshock_core::Result<BackgroundCharge<f64>> {
        Ok(self.core_parts()?.3)
    }

    /// Builds the problem, which includes the supersonic solve over the nozzle.
    pub fn problem(&self) -> epshock_core::Result<ShockProblem64> {
        let (gas, geom, entrance, b) = self.core_parts()?;
        ShockProblem64::new(entrance, gas.gamma, geom, b, self.settings())
    }

    pub fn to_map(&self) -> Map<String, Value> {
        let mut m = Map::new();
        let num = |x: f64| Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null);
        m.insert("gamma".into(), num(self.gamma));
        m.insert("r0".into(), num(self.r0));
        m.insert("r1".into(), num(self.r1));
        m.insert("rho0".into(), num(self.rho0));
        m.insert("u0".into(), num(self.u0));
        m.insert("p0".into(), num(self.p0));
        m.insert("E0".into(), num(self.e0));
        match &self.b {
            ChargeSpec::Constant(v) => {
                m.insert("b.constant".into(), num(*v));
            }
            ChargeSpec::Table(t) => {
                let rows = t.iter().map(|(a, b)| Value::Array(vec![num(*a), num(*b)])).collect();
                m.insert("b.table".into(), Value::Array(rows));
            }
        }
        if let Some(p) = self.p_ex {
            m.insert("p_ex".into(), num(p));
        }
        m.insert("rtol".into(), num(self.rtol));
        m.insert("atol".into(), num(self.atol));
        m.insert("sonic_guard".into(), num(self.sonic_guard));
        m.insert("tol_ts".into(), num(self.tol_ts));
        m.insert("fd_step".into(), num(self.fd_step));
        m.insert("seed".into(), Value::from(self.seed));
        m.insert("grid".into(), Value::from(self.grid));
        m.insert("force".into(), Value::Bool(self.force));
        m
    }

    /// `key = value` echo in a fixed key order; parses back to `self`.
    pub fn to_kv_string(&self) -> String {
        let map = self.to_map();
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = map.get(*key) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }
}

fn parse_lines(text: &str) -> Result<Map<String, Value>, ConfigError> {
    let mut map = Map::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax { line: i + 1, msg: "expected 'key = value'".into() });
        };
        let key = key.trim();
        let value: Value = serde_json::from_str(value.trim())
            .map_err(|e| ConfigError::Syntax { line: i + 1, msg: format!("bad value for '{key}': {e}") })?;
        if map.insert(key.to_string(), value).is_some() {
            return Err(ConfigError::DuplicateKey(key.to_string()));
        }
    }
    Ok(map)
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    v.as_f64().ok_or(ConfigError::Type { key: key.into(), expected: "a number" })
}

fn required(map: &Map<String, Value>, key: &'static str) -> Result<f64, ConfigError> {
    as_f64(key, map.get(key).ok_or(ConfigError::Missing(key))?)
}

fn optional(map: &Map<String, Value>, key: &str, default: f64) -> Result<f64, ConfigError> {
    map.get(key).map_or(Ok(default), |v| as_f64(key, v))
}

fn as_table(v: &Value) -> Result<Vec<(f64, f64)>, ConfigError> {
    let err = || ConfigError::Type { key: "b.table".into(), expected: "a list of [t, b] pairs" };
    v.as_array()
        .ok_or_else(err)?
        .iter()
        .map(|row| match row.as_array().map(|r| r.as_slice()) {
            Some([t, b]) => Ok((t.as_f64().ok_or_else(err)?, b.as_f64().ok_or_else(err)?)),
            _ => Err(err()),
        })
        .collect()
}
