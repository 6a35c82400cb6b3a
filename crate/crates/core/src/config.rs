//! Flat `key = value` configuration with precedence
//! command line > config file > built-in default.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::read_bytes;

/// Parse `key = value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", no + 1)))?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Config(format!("config line {}: empty key", no + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("config line {}: duplicate key '{key}'", no + 1)));
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let bytes = read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
    parse_config(&text)
}

/// Resolves settings and records every resolved value for the manifest.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Self {
            file,
            ..Self::default()
        }
    }

    pub fn from_path(path: Option<&Path>) -> Result<Self> {
        Ok(Self::new(match path {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        }))
    }

    /// Command-line value if given, else the file value, else `default`.
    pub fn resolve<T>(&mut self, key: &str, cli: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match cli {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(text) => text
                    .parse::<T>()
                    .map_err(|e| Error::Config(format!("config key '{key}' = '{text}': {e}")))?,
                None => default,
            },
        };
        self.used.insert(key.to_string());
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// As [`Settings::resolve`] with no default.
    pub fn resolve_opt<T>(&mut self, key: &str, cli: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match cli {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(text) => Some(
                    text.parse::<T>()
                        .map_err(|e| Error::Config(format!("config key '{key}' = '{text}': {e}")))?,
                ),
                None => None,
            },
        };
        self.used.insert(key.to_string());
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_string());
        }
        Ok(value)
    }

    /// Fails on config-file keys that no resolve call asked for.
    pub fn finish(self) -> Result<BTreeMap<String, String>> {
        if let Some(k) = self.file.keys().find(|k| !self.used.contains(*k)) {
            return Err(Error::Config(format!("unknown config key '{k}'")));
        }
        Ok(self.resolved)
    }

    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

/// Parse a number written as a decimal, `a/b` or `a^b`.
pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("cannot parse number '{s}'"));
    let v = if let Some((a, b)) = s.split_once('/') {
        parse_number(a)? / parse_number(b)?
    } else if let Some((a, b)) = s.split_once('^') {
        let exp = b.trim().trim_start_matches('(').trim_end_matches(')');
        parse_number(a)?.powf(parse_number(exp)?)
    } else {
        s.parse::<f64>().map_err(|_| bad())?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

/// Comma-separated list of [`parse_number`] values.
pub fn parse_number_list(s: &str) -> Result<Vec<f64>> {
    let v = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_number)
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(Error::Config("empty value list".into()));
    }
    Ok(v)
}
