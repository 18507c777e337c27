//! `key=value` text used for configs and run manifests.
//!
//! One pair per line; blank lines and lines starting with `#` are ignored.
//! Keys are trimmed, values keep interior whitespace but lose surrounding blanks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub fn parse(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                what: "key=value",
                line: n + 1,
                message: format!("missing '=' in {line:?}"),
            });
        };
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Parse {
                what: "key=value",
                line: n + 1,
                message: "empty key".into(),
            });
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn format<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    pairs
        .into_iter()
        .map(|(k, v)| format!("{k}={v}\n"))
        .collect()
}

/// Parses `map[key]` if present.
pub fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("invalid value {v:?} for {key}"))),
    }
}
