//! `key = value` configuration text.
//!
//! One pair per line, `#` starts a comment, keys are dotted paths. Every key
//! must be consumed by some reader; leftovers are reported with their line
//! number so typos fail fast.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, Entry>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || key.split('.').any(|part| part.is_empty()) {
                return Err(Error::Config {
                    line,
                    msg: format!("malformed key `{key}`"),
                });
            }
            if value.is_empty() {
                return Err(Error::Config {
                    line,
                    msg: format!("missing value for `{key}`"),
                });
            }
            let value = value.trim_matches('"').to_string();
            if let Some(prev) = entries.insert(key.to_string(), Entry { line, value }) {
                return Err(Error::Config {
                    line,
                    msg: format!("duplicate key `{key}` (first set on line {})", prev.line),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Line on which `key` was set, if any.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    pub fn take_str(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key).map(|e| (e.line, e.value))
    }

    pub fn require_str(&mut self, key: &str) -> Result<(usize, String)> {
        self.take_str(key)
            .ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take_str(key) {
            None => Ok(None),
            Some((line, v)) => v.parse::<T>().map(Some).map_err(|_| Error::Config {
                line,
                msg: format!("cannot parse `{v}` for `{key}`"),
            }),
        }
    }

    pub fn require<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    /// Comma-separated list of numbers.
    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        match self.take_str(key) {
            None => Ok(None),
            Some((line, v)) => parse_list(&v).map(Some).map_err(|msg| Error::Config {
                line,
                msg: format!("`{key}`: {msg}"),
            }),
        }
    }

    /// Fails on the first key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().min_by_key(|(_, e)| e.line) {
            None => Ok(()),
            Some((key, e)) => Err(Error::Config {
                line: e.line,
                msg: format!("unknown key `{key}`"),
            }),
        }
    }
}

pub fn parse_list<T: FromStr>(s: &str) -> std::result::Result<Vec<T>, String> {
    s.split(',')
        .map(|p| {
            let p = p.trim();
            p.parse::<T>().map_err(|_| format!("cannot parse list item `{p}`"))
        })
        .collect()
}
