//! Flag/file configuration merging.
//!
//! A config file is structured text: one `key value` pair per line, with
//! `#` starting a comment. Keys mirror the long flag names without the
//! leading dashes (`shots`, `state-seed`, ...). Resolution order is
//! command-line flag, then file value, then built-in default; each command
//! rejects keys it does not understand so typos fail loudly instead of
//! silently falling back to a default.

use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::{read_text, CliError, CliResult};

pub(crate) struct FileConfig {
    values: HashMap<String, String>,
}

impl FileConfig {
    pub fn empty() -> Self {
        Self {
            values: HashMap::new(),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        let mut values = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once(char::is_whitespace).ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected `key value`, got {line:?}",
                    path.display(),
                    idx + 1
                ))
            })?;
            if values
                .insert(key.to_string(), value.trim().to_string())
                .is_some()
            {
                return Err(CliError::Config(format!(
                    "{}:{}: key {key:?} given twice",
                    path.display(),
                    idx + 1
                )));
            }
        }
        Ok(Self { values })
    }

    /// Typed lookup: absent keys are `None`, unparsable values are errors.
    pub fn get<T>(&self, key: &str) -> CliResult<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|e| {
                CliError::Config(format!("config key {key:?}: bad value {raw:?}: {e}"))
            }),
        }
    }

    /// Rejects keys the current command does not understand.
    pub fn check_keys(&self, allowed: &[&str]) -> CliResult<()> {
        let mut unknown: Vec<&str> = self
            .values
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k))
            .collect();
        if unknown.is_empty() {
            return Ok(());
        }
        unknown.sort_unstable();
        Err(CliError::Config(format!(
            "unknown config keys: {}; this command accepts: {}",
            unknown.join(", "),
            allowed.join(", ")
        )))
    }
}

/// Flag value, else file value, else default.
pub(crate) fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// Parses a comma-separated list, rejecting empty input.
pub(crate) fn parse_list<T>(raw: &str, what: &str) -> CliResult<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    let items = raw
        .split(',')
        .map(|part| {
            let part = part.trim();
            part.parse().map_err(|e| {
                CliError::Config(format!("{what}: bad entry {part:?}: {e}"))
            })
        })
        .collect::<CliResult<Vec<T>>>()?;
    if items.is_empty() {
        return Err(CliError::Config(format!("{what}: empty list")));
    }
    Ok(items)
}
