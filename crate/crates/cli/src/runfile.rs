//! Flat `key = value` run files for the `loop` command.
//!
//! Blank lines, `#`/`;` comments and `[section]` headers are ignored. Keys
//! mirror the loop configuration fields in camelCase.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{CliError, CliResult};

pub const KEYS: &[&str] = &[
    "input",
    "format",
    "paradigm",
    "iterations",
    "trainSize",
    "generator",
    "selection",
    "generationMultiplier",
    "metric",
    "feature",
    "gamma",
    "masterSeed",
    "poolLimit",
    "out",
    "csv",
];

#[derive(Debug, Default, Clone, PartialEq)]
pub struct RunFile {
    values: BTreeMap<String, String>,
}

impl RunFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty()
                || line.starts_with('#')
                || line.starts_with(';')
                || line.starts_with('[')
            {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::config(format!(
                    "line {}: unknown key {key:?}",
                    lineno + 1
                )));
            }
            let value = value.trim().trim_matches('"');
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(CliError::config(format!(
                    "line {}: duplicate key {key:?}",
                    lineno + 1
                )));
            }
        }
        Ok(RunFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_ignores_noise() {
        let f = RunFile::parse("# run\n[loop]\nparadigm = replace\n\niterations=8\n; x\ngenerator = \"bootstrap:0.05\"\n")
            .unwrap();
        assert_eq!(f.get("paradigm"), Some("replace"));
        assert_eq!(f.get("iterations"), Some("8"));
        assert_eq!(f.get("generator"), Some("bootstrap:0.05"));
        assert_eq!(f.get("gamma"), None);
    }

    #[test]
    fn rejects_unknown_duplicate_and_malformed() {
        assert!(RunFile::parse("train_size = 4").is_err());
        assert!(RunFile::parse("gamma = 1\ngamma = 2").is_err());
        assert!(RunFile::parse("gamma").is_err());
    }
}
