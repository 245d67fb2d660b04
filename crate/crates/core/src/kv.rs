//! Flat `key = value` configuration text with dotted keys.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Parsed key-value file. Blank lines and `#` comments are skipped; every
/// other line must be `key = value` and keys may appear only once.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyValues {
    origin: PathBuf,
    entries: BTreeMap<String, (String, usize)>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && k.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        && !k.starts_with('.')
        && !k.ends_with('.')
        && !k.contains("..")
}

impl KeyValues {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, line, format!("expected `key = value`, found `{content}`")))?;
            let key = key.trim();
            if !valid_key(key) {
                return Err(Error::parse(origin, line, format!("malformed key `{key}`")));
            }
            if let Some((_, first)) = entries.get(key) {
                return Err(Error::parse(origin, line, format!("key `{key}` already set on line {first}")));
            }
            entries.insert(key.to_string(), (value.trim().to_string(), line));
        }
        Ok(Self {
            origin: origin.to_path_buf(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, path)
    }

    pub fn origin(&self) -> &Path {
        &self.origin
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    pub fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |(_, l)| *l)
    }

    /// Sets or replaces a value (used for command-line overrides).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !valid_key(key) {
            return Err(Error::InvalidArgument(format!("malformed key `{key}`")));
        }
        self.entries.insert(key.to_string(), (value.to_string(), 0));
        Ok(())
    }

    /// Error pointing at the line that set `key`.
    pub fn error(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        Error::parse(&self.origin, self.line(key), format!("`{key}`: {msg}"))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| self.error(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    /// Comma- or whitespace-separated list.
    pub fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(split_list)
    }
}

pub(crate) fn split_list(v: &str) -> Vec<String> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}
