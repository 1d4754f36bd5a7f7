//! Flat `key = value` config files with `[section]` headers.
//!
//! ```text
//! # shared defaults
//! seed = 7
//!
//! [sweep]
//! preset = desk
//! k = 1..5
//! ```
//!
//! Keys before the first header belong to every section. Command-line flags
//! override file values.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    sections: HashMap<String, HashMap<String, String>>,
}

const GLOBAL: &str = "";

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: HashMap<String, HashMap<String, String>> = HashMap::new();
        let mut current = GLOBAL.to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected 'key = value', got '{raw}'", i + 1))?;
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { sections })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        ConfigFile::parse(&text)
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .or_else(|| self.sections.get(GLOBAL).and_then(|s| s.get(key)))
            .map(String::as_str)
    }

    pub fn get<T>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.raw(section, key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("config [{section}] {key} = '{v}': {e}")),
        }
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn resolve<T>(&self, section: &str, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(match flag {
            Some(v) => v,
            None => self.get(section, key)?.unwrap_or(default),
        })
    }

    pub fn resolve_opt<T>(&self, section: &str, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.get(section, key)?,
        })
    }
}

/// Parses `a..b` (inclusive), `a..=b`, or a comma list `a,b,c`.
pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if let Some((lo, hi)) = s.split_once("..") {
        let hi = hi.strip_prefix('=').unwrap_or(hi);
        let lo: usize = lo.trim().parse().with_context(|| format!("bad range start in '{s}'"))?;
        let hi: usize = hi.trim().parse().with_context(|| format!("bad range end in '{s}'"))?;
        if lo > hi {
            bail!("empty range '{s}'");
        }
        return Ok((lo..=hi).collect());
    }
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad integer '{t}'")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_globals() {
        let cfg = ConfigFile::parse("seed = 3\n# note\n[sweep]\nn = 40 # agents\n[simulate]\nseed=9\n").unwrap();
        assert_eq!(cfg.get::<u64>("sweep", "seed").unwrap(), Some(3));
        assert_eq!(cfg.get::<u64>("simulate", "seed").unwrap(), Some(9));
        assert_eq!(cfg.get::<usize>("sweep", "n").unwrap(), Some(40));
        assert_eq!(cfg.get::<usize>("generate", "n").unwrap(), None);
        assert_eq!(cfg.resolve("sweep", "n", Some(10usize), 1).unwrap(), 10);
        assert_eq!(cfg.resolve("sweep", "n", None, 1usize).unwrap(), 40);
        assert_eq!(cfg.resolve("sweep", "missing", None, 1usize).unwrap(), 1);
        assert!(cfg.get::<usize>("sweep", "seed").is_ok());
        assert!(ConfigFile::parse("[x]\nnovalue\n").is_err());
        let bad = ConfigFile::parse("n = many").unwrap();
        assert!(bad.get::<usize>("sweep", "n").is_err());
    }

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_usize_list("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_usize_list("2..=3").unwrap(), vec![2, 3]);
        assert_eq!(parse_usize_list("5, 1,3").unwrap(), vec![5, 1, 3]);
        assert!(parse_usize_list("4..2").is_err());
        assert!(parse_usize_list("a,b").is_err());
    }
}
