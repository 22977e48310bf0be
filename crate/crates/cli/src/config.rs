//! Optional key=value configuration file. Command-line flags always take
//! precedence; the file only fills in flags that were not given.

use crate::error::{CliError, Result};
use std::collections::HashMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default, Clone)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        let mut values = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            values.insert(key.trim().to_owned(), value.trim().to_owned());
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::Validation(format!("config key {key}={raw:?}: {e}"))
            }),
        }
    }
}

/// Flag value if present, else the config value, else the default.
pub fn resolve<T: FromStr>(flag: Option<T>, cfg: &Config, key: &str, default: T) -> Result<T>
where
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(v),
        None => Ok(cfg.get(key)?.unwrap_or(default)),
    }
}

/// Like [`resolve`] but with no default: the value must come from the flag
/// or the config file.
pub fn resolve_required<T: FromStr>(
    flag: Option<T>,
    cfg: &Config,
    key: &str,
) -> Result<T>
where
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(v),
        None => cfg.get(key)?.ok_or_else(|| {
            CliError::Validation(format!("missing required option --{key}"))
        }),
    }
}
