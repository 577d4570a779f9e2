//! Flat `key: value` text documents used for configs, recipes, manifests and reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum KvError {
    #[error("line {line}: expected `key: value`")]
    Malformed { line: usize },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
    #[error("missing key {0:?}")]
    Missing(String),
    #[error("key {key:?}: invalid value {value:?}")]
    Invalid { key: String, value: String },
}

/// Parsed document: keys in file order plus lookup.
#[derive(Clone, Debug, Default)]
pub struct KvDoc {
    entries: BTreeMap<String, String>,
    order: Vec<String>,
}

impl KvDoc {
    pub fn parse(text: &str) -> Result<Self, KvError> {
        let mut doc = KvDoc::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once(':').ok_or(KvError::Malformed { line: n + 1 })?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(KvError::Malformed { line: n + 1 });
            }
            if doc.entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(KvError::Duplicate { line: n + 1, key });
            }
            doc.order.push(key);
        }
        Ok(doc)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, KvError> {
        self.get(key).ok_or_else(|| KvError::Missing(key.to_string()))
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, KvError> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| KvError::Invalid { key: key.to_string(), value: v.to_string() }))
            .transpose()
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, KvError> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    pub fn parse_req<T: FromStr>(&self, key: &str) -> Result<T, KvError> {
        self.parse_opt(key)?.ok_or_else(|| KvError::Missing(key.to_string()))
    }

    /// Whitespace-separated list of exactly `N` values.
    pub fn parse_array<T: FromStr + Copy + Default, const N: usize>(
        &self,
        key: &str,
    ) -> Result<Option<[T; N]>, KvError> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let bad = || KvError::Invalid { key: key.to_string(), value: v.to_string() };
        let parts: Vec<&str> = v.split_whitespace().collect();
        if parts.len() != N {
            return Err(bad());
        }
        let mut out = [T::default(); N];
        for (slot, p) in out.iter_mut().zip(parts) {
            *slot = p.parse().map_err(|_| bad())?;
        }
        Ok(Some(out))
    }

    /// Keys in file order.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    /// Entries under `prefix.`, with the prefix stripped, in file order.
    pub fn section(&self, prefix: &str) -> KvDoc {
        let lead = format!("{prefix}.");
        let mut doc = KvDoc::default();
        for key in &self.order {
            if let Some(rest) = key.strip_prefix(&lead) {
                doc.entries.insert(rest.to_string(), self.entries[key].clone());
                doc.order.push(rest.to_string());
            }
        }
        doc
    }
}

/// Ordered builder for `key: value` output with LF line endings.
#[derive(Default)]
pub struct KvWriter {
    buf: String,
}

impl KvWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        let _ = writeln!(self.buf, "# {text}");
        self
    }

    pub fn entry(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let _ = writeln!(self.buf, "{key}: {value}");
        self
    }

    pub fn real(&mut self, key: &str, value: f64) -> &mut Self {
        self.entry(key, format_sig(value, 9))
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Formats `x` with `sig` significant digits using C `%g` rules.
pub fn format_sig(x: f64, sig: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sig = sig.max(1);
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
