//! Flat `key=value` text records used by the configuration files.
//!
//! Blank lines and `#` comments are ignored. A line of the form `[name]`
//! opens a section; keys inside it are stored as `name.key`.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Record {
    entries: BTreeMap<String, (usize, String)>,
}

impl Record {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::parse(line_no, "unterminated section header"))?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(line_no, format!("expected key=value, got `{line}`"))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(line_no, "empty key"));
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if entries
                .insert(full.clone(), (line_no, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::parse(line_no, format!("duplicate key `{full}`")));
            }
        }
        Ok(Record { entries })
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let (line, v) = self
            .entries
            .get(key)
            .ok_or_else(|| Error::parse(0, format!("missing key `{key}`")))?;
        parse_number(*line, key, v)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        if self.contains(key) {
            self.f64(key)
        } else {
            Ok(default)
        }
    }

    /// Fails on the first entry that is not a number.
    pub fn all_numeric(&self) -> Result<()> {
        let mut by_line: Vec<_> = self.entries.iter().collect();
        by_line.sort_by_key(|(_, (line, _))| *line);
        for (key, (line, v)) in by_line {
            parse_number(*line, key, v)?;
        }
        Ok(())
    }

    /// Parses `lo,hi` pairs.
    pub fn interval(&self, key: &str) -> Result<Option<(f64, f64)>> {
        let Some((line, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        let (lo, hi) = v
            .split_once(',')
            .ok_or_else(|| Error::parse(*line, format!("`{key}` expects `lo,hi`")))?;
        Ok(Some((
            parse_number(*line, key, lo.trim())?,
            parse_number(*line, key, hi.trim())?,
        )))
    }

    /// Rejects keys outside `allowed`, reporting the offending line.
    pub fn deny_unknown(&self, allowed: &[&str]) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::parse(*line, format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }
}

fn parse_number(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::parse(line, format!("`{key}`: `{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::parse(line, format!("`{key}` must be finite")));
    }
    Ok(x)
}

/// Formats a float so that it reads back bit-identically.
pub(crate) fn fmt_f64(x: f64) -> String {
    let mut s = String::new();
    write!(s, "{x:?}").unwrap();
    s
}
