//! Flag and config-file resolution. Every value read is recorded so the
//! effective configuration can be echoed with the report.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// A per-hour rate written as a decimal or a fraction like `1/200000`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Rate(pub f64);

impl FromStr for Rate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"));
        let v = match s.split_once('/') {
            Some((a, b)) => {
                let d = num(b)?;
                if d == 0.0 {
                    return Err(format!("{s:?}: division by zero"));
                }
                num(a)? / d
            }
            None => num(s)?,
        };
        if !v.is_finite() {
            return Err(format!("{s:?} is not finite"));
        }
        Ok(Rate(v))
    }
}

/// Exchange rates as a comma list (`1,10,100`) or a decade range (`10..1000`).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RateList(pub Vec<f64>);

impl FromStr for RateList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some((a, b)) = s.split_once("..") {
            let (lo, hi) = (a.parse::<Rate>()?.0, b.parse::<Rate>()?.0);
            if !(lo > 0.0 && hi >= lo) {
                return Err(format!("range {s:?} needs 0 < start <= end"));
            }
            let steps = (hi / lo).log10().round() as i32;
            let mut out: Vec<f64> = (0..=steps).map(|i| lo * 10f64.powi(i)).collect();
            if (out[out.len() - 1] / hi - 1.0).abs() > 1e-9 {
                out.push(hi);
            }
            return Ok(RateList(out));
        }
        let v = s.split(',').map(|t| t.parse::<Rate>().map(|r| r.0)).collect::<Result<Vec<_>, _>>()?;
        if v.is_empty() {
            return Err("empty list".into());
        }
        Ok(RateList(v))
    }
}

/// Comma-separated integers, e.g. `2,10,2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Ints(pub Vec<usize>);

impl FromStr for Ints {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(Ints)
    }
}

pub struct Resolver {
    file: Map<String, Value>,
    effective: Map<String, Value>,
}

impl Resolver {
    pub fn new(file: Map<String, Value>) -> Self {
        Resolver { file, effective: Map::new() }
    }

    /// Reads a flat JSON object of key/value pairs.
    pub fn from_path(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Resolver::new(Map::new()));
        };
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("config {}: {e}", path.display())))?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(map)) => Ok(Resolver::new(map)),
            Ok(_) => Err(CliError::Invalid(format!("config {}: expected a JSON object", path.display()))),
            Err(e) => Err(CliError::Invalid(format!("config {}: {e}", path.display()))),
        }
    }

    fn file_value<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let snake = key.replace('-', "_");
        let Some(v) = self.file.get(key).or_else(|| self.file.get(&snake)) else {
            return Ok(None);
        };
        let text = match v {
            Value::String(s) => s.clone(),
            Value::Array(items) => {
                items.iter().map(|i| i.to_string().trim_matches('"').to_string()).collect::<Vec<_>>().join(",")
            }
            other => other.to_string(),
        };
        text.parse().map(Some).map_err(|e| CliError::Invalid(format!("config key {key}: {e}")))
    }

    /// The flag if given, else the config file value.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.file_value(key)?,
        };
        if let Some(v) = &v {
            self.effective.insert(key.into(), serde_json::to_value(v).expect("plain value"));
        }
        Ok(v)
    }

    pub fn or<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        let v = self.get(key, flag)?.unwrap_or(default);
        self.effective.insert(key.into(), serde_json::to_value(&v).expect("plain value"));
        Ok(v)
    }

    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Serialize,
        T::Err: Display,
    {
        self.get(key, flag)?.ok_or_else(|| CliError::Usage(format!("missing --{key} (flag or config key)")))
    }

    pub fn effective(self) -> Map<String, Value> {
        self.effective
    }
}
