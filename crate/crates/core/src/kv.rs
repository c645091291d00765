//! Line-oriented `key = value` text used by config files, checkpoints and
//! log metadata. `#` starts a comment line, `[name]` opens a section.

use crate::error::{Error, Result};

/// Shortest decimal form that still pins the exact `f64`: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_f64(path: &str, line: usize, key: &str, raw: &str) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{key}: '{raw}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            path,
            line,
            format!("{key}: value is not finite"),
        ));
    }
    Ok(v)
}

pub fn parse_usize(path: &str, line: usize, key: &str, raw: &str) -> Result<usize> {
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("{key}: '{raw}' is not a count")))
}

pub fn parse_u64(path: &str, line: usize, key: &str, raw: &str) -> Result<u64> {
    raw.trim().parse().map_err(|_| {
        Error::parse(
            path,
            line,
            format!("{key}: '{raw}' is not an unsigned integer"),
        )
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Line<'a> {
    Section(&'a str),
    Entry { key: &'a str, value: &'a str },
}

/// Splits `text` into numbered (1-based) sections and entries; blank lines and
/// comments are dropped.
pub fn lines<'a>(path: &str, text: &'a str) -> Result<Vec<(usize, Line<'a>)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let n = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::parse(path, n, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(Error::parse(path, n, "empty section name"));
            }
            out.push((n, Line::Section(name)));
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::parse(path, n, format!("expected 'key = value', got '{line}'"))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::parse(path, n, "empty key"));
        }
        out.push((
            n,
            Line::Entry {
                key,
                value: value.trim(),
            },
        ));
    }
    Ok(out)
}
