//! Flat `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment and blank lines are
//! skipped. Values are free text until end of line, so paths need no
//! quoting. Typed getters parse on demand and report the offending key
//! on failure. Command-line flags override file values, so the file
//! only supplies defaults.

use std::path::Path;

use crate::error::{Error, Result};

/// A parsed configuration file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: Vec<(String, String)>,
}

impl ConfigFile {
    /// Parse configuration text. Duplicate keys are rejected so a
    /// typo'd override cannot silently lose.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", i + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::InvalidConfig(format!("line {}: empty key", i + 1)));
            }
            if entries.iter().any(|(k, _)| k == key) {
                return Err(Error::InvalidConfig(format!(
                    "line {}: duplicate key {key:?}",
                    i + 1
                )));
            }
            entries.push((key.to_string(), value.to_string()));
        }
        Ok(Self { entries })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.typed(key, |v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.typed(key, |v| v.parse::<u64>().ok())
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.typed(key, |v| v.parse::<usize>().ok())
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.typed(key, |v| match v {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        })
    }

    fn typed<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.get_str(key) {
            None => Ok(None),
            Some(v) => parse(v).map(Some).ok_or_else(|| {
                Error::InvalidConfig(format!("key {key:?}: cannot parse value {v:?}"))
            }),
        }
    }

    /// Keys present in the file but not in `known`, in file order. The
    /// command line rejects these so misspelled settings surface early.
    pub fn unknown_keys(&self, known: &[&str]) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(k, _)| !known.contains(&k.as_str()))
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
