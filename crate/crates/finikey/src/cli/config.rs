//! `key=value` config files: fallback values for flags the user omitted.
//!
//! Keys match the long flag names (case-sensitive, so `N` and `n` stay
//! distinct); dashes and underscores are interchangeable. Lines starting
//! with `#` and blank lines are ignored. Unknown keys are rejected so typos
//! do not silently change a sweep.

use super::CliError;
use std::collections::HashMap;
use std::path::Path;

const KNOWN_KEYS: &[&str] = &[
    "N",
    "n",
    "m",
    "qber",
    "q_true",
    "eps_pa",
    "eps_bar",
    "eps_pe",
    "eps_ec",
    "eps_total",
    "protocol",
    "f",
    "d",
    "n_pe",
    "measured_leak",
    "n_min",
    "n_max",
    "points",
    "case",
    "r_inf",
    "target_dv",
    "trials",
    "seed",
    "mode",
];

#[derive(Debug, Default)]
pub struct ConfigMap {
    entries: HashMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigMap {
    /// Load from the explicit path if given, else from `$FINIKEY_CONFIG`,
    /// else empty.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let path = match path {
            Some(p) => p.to_path_buf(),
            None => match std::env::var_os("FINIKEY_CONFIG") {
                Some(env_path) => std::path::PathBuf::from(env_path),
                None => return Ok(ConfigMap::default()),
            },
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Io(format!("config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
            let key = normalize(key);
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key {key:?}", lineno + 1));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(ConfigMap { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize(key)).map(String::as_str)
    }

    /// Flag value if present, else the parsed config entry, else `None`.
    pub fn resolve<T>(
        &self,
        key: &str,
        flag: Option<T>,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            Some(text) => parse(text)
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config {key}: {e}"))),
            None => Ok(None),
        }
    }

    /// Like [`ConfigMap::resolve`] but the value must come from somewhere.
    pub fn require<T>(
        &self,
        key: &str,
        flag: Option<T>,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<T, CliError> {
        self.resolve(key, flag, parse)?.ok_or_else(|| {
            CliError::Usage(format!("missing --{key} (no flag and no config entry)"))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_normalizes_keys() {
        let cfg = ConfigMap::parse("qber = 0.01\nn-pe=2\n# comment\n\neps_pa=1e-3\n").unwrap();
        assert_eq!(cfg.get("qber"), Some("0.01"));
        assert_eq!(cfg.get("n_pe"), Some("2"));
        assert_eq!(cfg.get("eps-pa"), Some("1e-3"));
        assert_eq!(cfg.get("seed"), None);
    }

    #[test]
    fn capital_and_lowercase_n_stay_distinct() {
        let cfg = ConfigMap::parse("N=1e6\nn=5e5\n").unwrap();
        assert_eq!(cfg.get("N"), Some("1e6"));
        assert_eq!(cfg.get("n"), Some("5e5"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(ConfigMap::parse("qbert=0.01\n").is_err());
        assert!(ConfigMap::parse("just a line\n").is_err());
    }

    #[test]
    fn flags_override_config() {
        let cfg = ConfigMap::parse("qber=0.05\n").unwrap();
        let resolved = cfg
            .resolve("qber", Some(0.01), |s| {
                s.parse::<f64>().map_err(|e| e.to_string())
            })
            .unwrap();
        assert_eq!(resolved, Some(0.01));
        let fallback = cfg
            .resolve("qber", None, |s| {
                s.parse::<f64>().map_err(|e| e.to_string())
            })
            .unwrap();
        assert_eq!(fallback, Some(0.05));
    }
}
