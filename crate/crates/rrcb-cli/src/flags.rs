//! Minimal `--key value` flag parsing with a per-command allow list.

use crate::CliError;
use std::collections::BTreeMap;
use std::path::PathBuf;

pub struct Flags {
    map: BTreeMap<String, String>,
}

impl Flags {
    pub fn parse(args: &[String], allowed: &[&str]) -> Result<Flags, CliError> {
        let mut map = BTreeMap::new();
        let mut i = 0;
        while i < args.len() {
            let key = args[i]
                .strip_prefix("--")
                .ok_or_else(|| CliError::Usage(format!("expected a --flag, got '{}'", args[i])))?;
            if !allowed.contains(&key) {
                return Err(CliError::Usage(format!("unknown flag '--{key}'")));
            }
            let value = args
                .get(i + 1)
                .ok_or_else(|| CliError::Usage(format!("flag '--{key}' needs a value")))?;
            if map.insert(key.to_string(), value.clone()).is_some() {
                return Err(CliError::Usage(format!("flag '--{key}' given twice")));
            }
            i += 2;
        }
        Ok(Flags { map })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| CliError::Usage(format!("missing required flag '--{key}'")))
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("flag '--{key}' expects a count, got '{v}'")))
            })
            .transpose()
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("flag '--{key}' expects a number, got '{v}'")))
            })
            .transpose()
    }

    pub fn require_path(&self, key: &str) -> Result<PathBuf, CliError> {
        Ok(PathBuf::from(self.require(key)?))
    }

    /// Seed resolution: the flag wins, then RRCB_SEED, then 0.
    pub fn seed(&self) -> Result<u64, CliError> {
        if let Some(v) = self.get("seed") {
            return v
                .parse::<u64>()
                .map_err(|_| CliError::Usage(format!("flag '--seed' expects an integer, got '{v}'")));
        }
        if let Ok(v) = std::env::var("RRCB_SEED") {
            return v
                .parse::<u64>()
                .map_err(|_| CliError::Usage(format!("RRCB_SEED expects an integer, got '{v}'")));
        }
        Ok(0)
    }
}
