//! Optional `key=value` configuration file.
//!
//! Blank lines and lines starting with `#` are skipped. Values from the file
//! fill in whatever the command line leaves unset.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use compandor::{DesignConfig, ModelKind};

use crate::args::{DesignFlags, Format};
use crate::error::CliError;

const KEYS: [&str; 8] = [
    "levels", "model", "sigma", "segments", "format", "seed", "samples", "shards",
];

pub const DEFAULT_LEVELS: usize = 128;
pub const DEFAULT_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileSettings {
    values: BTreeMap<String, String>,
}

impl FileSettings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key=value", i + 1))
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key '{key}'",
                    i + 1
                )));
            }
            values.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| CliError::Usage(format!("config key '{key}': {e}")))
            })
            .transpose()
    }

    /// Flag if given, else file value, else `default`.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn format(&self, flag: Option<Format>, default: Format) -> Result<Format, CliError> {
        self.pick(flag, "format", default)
    }

    pub fn design_config(&self, flags: &DesignFlags) -> Result<DesignConfig, CliError> {
        let levels = self.pick(flags.levels, "levels", DEFAULT_LEVELS)?;
        let model = self.pick(flags.model, "model", ModelKind::QuadraticSpline)?;
        let sigma = self.pick(flags.sigma, "sigma", 1.0)?;
        let segments = self.pick(flags.segments, "segments", 2)?;
        let config = DesignConfig::new(levels, model)
            .with_sigma(sigma)
            .with_segments(segments);
        config.validate()?;
        Ok(config)
    }
}
