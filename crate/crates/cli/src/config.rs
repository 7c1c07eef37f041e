//! `key = value` configuration files. Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
    source: String,
}

impl KeyValues {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("{source}:{}: expected `key = value`", i + 1))?;
            let key = k.trim().to_ascii_lowercase();
            if entries.insert(key.clone(), (i + 1, v.trim().to_string())).is_some() {
                bail!("{source}:{}: duplicate key `{key}`", i + 1);
            }
        }
        Ok(Self { entries, source: source.to_string() })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => {
                v.parse().map(Some).map_err(|e| anyhow!("{}:{line}: bad value `{v}` for `{key}`: {e}", self.source))
            }
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    /// Fail on keys outside `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        for (k, (line, _)) in &self.entries {
            if !known.contains(&k.as_str()) {
                bail!("{}:{line}: unknown key `{k}` (known: {})", self.source, known.join(", "));
            }
        }
        Ok(())
    }
}

/// `72:50, 60:50` into `(code, count)` pairs.
pub fn parse_population(s: &str) -> Result<Vec<(u8, usize)>> {
    s.split(',')
        .map(|part| {
            let (c, n) =
                part.trim().split_once(':').ok_or_else(|| anyhow!("population entry `{part}` is not code:count"))?;
            Ok((c.trim().parse()?, n.trim().parse()?))
        })
        .collect()
}
