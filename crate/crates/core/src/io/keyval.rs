//! Flat dotted-key text grammar shared by config, rig, and scene files.
//!
//! One `key = value` per line; keys are dotted words (`frame.0.timestamp`),
//! values run to the end of the line. `#` starts a comment, blank lines are
//! ignored, duplicate keys are an error. Values keep internal whitespace,
//! so vector-valued fields are space-separated numbers in one value.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KeyValError {
    #[error("line {line}: expected 'key = value'")]
    BadLine { line: usize },
    #[error("line {line}: invalid key '{key}'")]
    BadKey { line: usize, key: String },
    #[error("line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("missing key '{0}'")]
    Missing(String),
    #[error("key '{key}': cannot parse '{value}' as {want}")]
    BadValue {
        key: String,
        value: String,
        want: &'static str,
    },
}

fn key_ok(key: &str) -> bool {
    !key.is_empty()
        && key
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !key.starts_with('.')
        && !key.ends_with('.')
}

/// Parsed key-value document; preserves insertion order for rendering.
#[derive(Debug, Clone, Default)]
pub struct KeyVal {
    entries: Vec<(String, String)>,
    index: HashMap<String, usize>,
}

impl KeyVal {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, KeyValError> {
        let mut kv = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let Some(eq) = stripped.find('=') else {
                return Err(KeyValError::BadLine { line });
            };
            let key = stripped[..eq].trim();
            let value = stripped[eq + 1..].trim();
            if !key_ok(key) {
                return Err(KeyValError::BadKey {
                    line,
                    key: key.to_string(),
                });
            }
            if kv.index.contains_key(key) {
                return Err(KeyValError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            kv.push(key, value);
        }
        Ok(kv)
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        debug_assert!(key_ok(key), "invalid key '{key}'");
        self.index.insert(key.to_string(), self.entries.len());
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.index.get(key).map(|&i| self.entries[i].1.as_str())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.index.contains_key(key)
    }

    pub fn require(&self, key: &str) -> Result<&str, KeyValError> {
        self.get(key).ok_or_else(|| KeyValError::Missing(key.into()))
    }

    fn parse_as<T: std::str::FromStr>(
        &self,
        key: &str,
        want: &'static str,
    ) -> Result<T, KeyValError> {
        let value = self.require(key)?;
        value.parse().map_err(|_| KeyValError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
            want,
        })
    }

    pub fn f64(&self, key: &str) -> Result<f64, KeyValError> {
        self.parse_as(key, "a number")
    }

    pub fn u64(&self, key: &str) -> Result<u64, KeyValError> {
        self.parse_as(key, "an unsigned integer")
    }

    pub fn i64(&self, key: &str) -> Result<i64, KeyValError> {
        self.parse_as(key, "an integer")
    }

    pub fn usize(&self, key: &str) -> Result<usize, KeyValError> {
        self.parse_as(key, "an unsigned integer")
    }

    /// Space-separated numbers, exactly `n` of them.
    pub fn f64_list(&self, key: &str, n: usize) -> Result<Vec<f64>, KeyValError> {
        let value = self.require(key)?;
        let parts: Result<Vec<f64>, _> =
            value.split_whitespace().map(str::parse::<f64>).collect();
        match parts {
            Ok(list) if list.len() == n => Ok(list),
            _ => Err(KeyValError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
                want: "space-separated numbers",
            }),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Renders back to the text grammar, one entry per line in insertion
    /// order. `parse(render(kv))` reproduces `kv`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Formats a float so it parses back to exactly the same f64.
pub fn fmt_f64(v: f64) -> String {
    // 17 significant digits round-trip any f64; trim when fewer suffice.
    let short = format!("{v}");
    if short.parse::<f64>() == Ok(v) {
        short
    } else {
        format!("{v:.17e}")
    }
}
