use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A usage problem: bad flag values, unknown keys, unreadable config files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

/// Keys that configure the run rather than the experiment.
pub const RUN_KEYS: [&str; 5] = ["seed", "out", "format", "threads", "timing"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub params: Params,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub threads: usize,
    pub timing: bool,
}

/// Parses a plain `key = value` file. Blank lines and `#` comments are
/// skipped.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, UsageError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value, got {raw:?}", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(usage(format!("config line {}: empty key", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>, UsageError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

pub fn parse_assignment(s: &str) -> Result<(String, String), UsageError> {
    let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("expected key=value, got {s:?}")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Experiment parameters after merging defaults, file and flags.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    /// Starts from `defaults` and applies `overrides`; keys outside the
    /// defaults are rejected.
    pub fn merge(
        experiment: &str,
        defaults: &[(&str, &str)],
        overrides: &BTreeMap<String, String>,
    ) -> Result<Self, UsageError> {
        let mut values: BTreeMap<String, String> =
            defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in overrides {
            if !values.contains_key(k) {
                let known: Vec<&str> = defaults.iter().map(|d| d.0).collect();
                return Err(usage(format!(
                    "experiment {experiment} has no parameter {k:?} (known: {})",
                    known.join(", ")
                )));
            }
            values.insert(k.clone(), v.clone());
        }
        Ok(Params { values })
    }

    fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| panic!("parameter {key} not declared"))
    }

    pub fn f64(&self, key: &str) -> Result<f64, UsageError> {
        parse_f64(key, self.raw(key))
    }

    pub fn u64(&self, key: &str) -> Result<u64, UsageError> {
        parse_u64(key, self.raw(key))
    }

    pub fn usize(&self, key: &str) -> Result<usize, UsageError> {
        Ok(self.u64(key)? as usize)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, UsageError> {
        self.raw(key).split(',').map(|s| parse_f64(key, s.trim())).collect()
    }

    /// `k=v` pairs joined by `;`, in key order.
    pub fn describe(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, UsageError> {
    let v: f64 = s.parse().map_err(|_| usage(format!("{key}: {s:?} is not a number")))?;
    if !v.is_finite() {
        return Err(usage(format!("{key}: {s:?} is not finite")));
    }
    Ok(v)
}

/// Accepts plain integers and exact float spellings such as `1e7`.
fn parse_u64(key: &str, s: &str) -> Result<u64, UsageError> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    let f = parse_f64(key, s)?;
    if f < 0.0 || f.fract() != 0.0 || f > 9_007_199_254_740_992.0 {
        return Err(usage(format!("{key}: {s:?} is not a nonnegative integer")));
    }
    Ok(f as u64)
}

pub fn parse_bool(key: &str, s: &str) -> Result<bool, UsageError> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(usage(format!("{key}: {s:?} is not a boolean"))),
    }
}
