//! `key = value` configuration files layered under command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

/// Lower-cases a key and folds `-` into `_` so `out-dir` and `out_dir` match.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

/// Parses one `key = value` pair per line. `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{}`", n + 1, raw.trim()))?;
        let key = normalize_key(key);
        if key.is_empty() {
            bail!("line {}: empty key", n + 1);
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            bail!("line {}: duplicate key `{key}`", n + 1);
        }
    }
    Ok(out)
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    /// Merges file entries with flag values; flags win. Keys outside
    /// `allowed` are rejected wherever they come from.
    pub fn resolve<I, K>(allowed: &[&str], file: Option<BTreeMap<String, String>>, flags: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, Option<String>)>,
        K: AsRef<str>,
    {
        let mut values = BTreeMap::new();
        for (key, value) in file.unwrap_or_default() {
            if !allowed.contains(&key.as_str()) {
                bail!("unknown configuration key `{key}` (accepted: {})", allowed.join(", "));
            }
            values.insert(key, value);
        }
        for (key, value) in flags {
            let key = normalize_key(key.as_ref());
            if !allowed.contains(&key.as_str()) {
                bail!("unknown configuration key `{key}`");
            }
            if let Some(v) = value {
                values.insert(key, v);
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<BTreeMap<String, String>> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        parse_config(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("invalid value `{v}` for `{key}`: {e}")))
            .transpose()
    }

    pub fn get_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T>(&self, key: &str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| anyhow!("missing required setting `{key}`"))
    }

    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => bail!("invalid boolean `{v}` for `{key}`"),
            },
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }
}

/// Accepts `0.64`, `183/287` or `183:104` (positives:negatives).
pub fn parse_balance(s: &str) -> Result<f64> {
    let s = s.trim();
    let fraction = if let Some((a, b)) = s.split_once('/') {
        let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
        a / b
    } else if let Some((a, b)) = s.split_once(':') {
        let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
        a / (a + b)
    } else {
        s.parse()?
    };
    if !(fraction > 0.0 && fraction < 1.0) {
        bail!("class balance `{s}` must lie strictly between 0 and 1");
    }
    Ok(fraction)
}

/// `tp,fp,fn,tn`.
pub fn parse_confusion(s: &str) -> Result<[usize; 4]> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("confusion counts `{s}`"))?;
    parts
        .try_into()
        .map_err(|_| anyhow!("confusion counts `{s}` must be four integers tp,fp,fn,tn"))
}
