//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Later keys override earlier
//! ones.

use std::path::Path;

use crate::error::{CpcError, Result};

pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CpcError::Config {
            line: idx + 1,
            reason: format!("expected `key = value`, found `{line}`"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(CpcError::Config {
                line: idx + 1,
                reason: "empty key".into(),
            });
        }
        out.retain(|(k, _)| k != key);
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

pub fn read_key_values(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CpcError::io(path, e))?;
    parse_key_values(&text)
}

pub fn render_key_values(entries: &[(String, String)]) -> String {
    entries
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

pub(crate) fn parse_value<T: std::str::FromStr>(key: &'static str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CpcError::invalid(key, format!("cannot parse `{value}`")))
}
