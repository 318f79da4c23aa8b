//! Flat `key = value` run configuration. Command-line flags override file values; keys are the
//! long flag names without the leading dashes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};

/// A problem with the invocation rather than the run; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage<T>(message: impl Into<String>) -> Result<T> {
    Err(UsageError(message.into()).into())
}

pub const KEYS: &[&str] = &[
    "accuracies",
    "class",
    "classes",
    "corpus",
    "count",
    "family",
    "graph",
    "input",
    "max-training-nodes",
    "method",
    "models",
    "out",
    "parts",
    "random",
    "seed",
    "sizes",
    "splice-edges",
    "tally",
    "tau",
    "tau-step",
    "train-fraction",
    "training-walks",
    "truth",
    "walks-per-node",
    "weights",
    "workers",
];

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Settings> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return usage(format!("config line {}: expected key=value", i + 1));
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return usage(format!("config line {}: unknown key {key:?}", i + 1));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Settings { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Settings> {
        match path {
            None => Ok(Settings::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                Settings::parse(&text)
            }
        }
    }

    /// Raw value of `key`: the flag if given, else the config file entry.
    pub fn raw(&self, key: &str, flag: &Option<String>) -> Option<String> {
        flag.clone().or_else(|| self.values.get(key).cloned())
    }

    pub fn get<T: FromStr>(&self, key: &str, flag: &Option<String>) -> Result<Option<T>> {
        self.raw(key, flag)
            .map(|v| v.parse::<T>().or_else(|_| usage(format!("invalid value {v:?} for {key}"))))
            .transpose()
    }

    pub fn require<T: FromStr>(&self, key: &str, flag: &Option<String>) -> Result<T> {
        match self.get(key, flag)? {
            Some(v) => Ok(v),
            None => usage(format!("missing --{key} (flag or config key {key})")),
        }
    }

    pub fn or<T: FromStr>(&self, key: &str, flag: &Option<String>, default: T) -> Result<T> {
        Ok(self.get(key, flag)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, key: &str, flag: &Option<String>) -> Result<Option<Vec<T>>> {
        self.raw(key, flag)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        let item = item.trim();
                        item.parse::<T>().or_else(|_| usage(format!("invalid item {item:?} in {key}")))
                    })
                    .collect()
            })
            .transpose()
    }
}

/// Ascending, unique lens sizes of at least 2.
pub fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.is_empty() || sizes[0] < 2 || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return usage(format!("sizes must be ascending, unique and at least 2, got {sizes:?}"));
    }
    Ok(())
}

pub fn check_fraction(f: f64) -> Result<()> {
    if !(f > 0.0 && f < 1.0) {
        return usage(format!("train-fraction must lie in (0, 1), got {f}"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let s = Settings::parse("# run\nseed = 3\nsizes=8,16\n").unwrap();
        assert_eq!(s.require::<u64>("seed", &None).unwrap(), 3);
        assert_eq!(s.require::<u64>("seed", &Some("9".into())).unwrap(), 9);
        assert_eq!(s.list::<usize>("sizes", &None).unwrap(), Some(vec![8, 16]));
        assert_eq!(s.or::<usize>("workers", &None, 4).unwrap(), 4);
    }

    #[test]
    fn bad_config_is_a_usage_error() {
        for text in ["nonsense", "colour=red"] {
            let err = Settings::parse(text).unwrap_err();
            assert!(err.downcast_ref::<UsageError>().is_some());
        }
        let s = Settings::default();
        assert!(s.require::<u64>("seed", &None).unwrap_err().downcast_ref::<UsageError>().is_some());
        assert!(s.get::<u64>("seed", &Some("x".into())).is_err());
    }
}
