//! Run-configuration resolution: command-line flag > config file > default,
//! with every resolved value recorded so output artifacts can embed the
//! exact configuration that produced them.
//!
//! Config files are flat `key = value` text; `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A parsed `key = value` config file.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    map: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        ConfigFile::default()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(Error::Parse {
                line: idx + 1,
                msg: format!("expected 'key = value', got '{raw}'"),
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }
}

/// The fully-resolved configuration of one command invocation.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    resolved: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new() -> Self {
        RunConfig::default()
    }

    /// Resolve one typed knob and record the winning value under `key`.
    pub fn resolve<T>(&mut self, key: &str, flag: Option<T>, file: &ConfigFile, default: T) -> Result<T>
    where
        T: FromStr + Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match file.get(key) {
                Some(raw) => raw.parse::<T>().map_err(|_| {
                    Error::invalid(format!("config key '{key}': bad value '{raw}'"))
                })?,
                None => default,
            },
        };
        self.record(key, &value);
        Ok(value)
    }

    /// Record a value that needs no resolution (paths, switches).
    pub fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    /// Sorted key/value snapshot for embedding into artifacts.
    pub fn entries(&self) -> Vec<(String, String)> {
        self.resolved
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    /// The snapshot as `key = value` lines (manifest format).
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.resolved {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}
