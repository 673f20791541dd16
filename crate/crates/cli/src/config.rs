//! Layering of config-file sections under command-line flags.

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{invalid, CliResult};

/// Parsed `--config` file: top-level globals plus one table per subcommand.
#[derive(Debug, Default)]
pub struct ConfigFile {
    root: toml::Table,
}

impl ConfigFile {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let root: toml::Table = text.parse().map_err(|e| invalid(format!("config {origin}: {e}")))?;
        Ok(Self { root })
    }

    pub fn global<T: DeserializeOwned>(&self, key: &str) -> CliResult<Option<T>> {
        match self.root.get(key) {
            None => Ok(None),
            Some(v) => v.clone().try_into().map(Some).map_err(|e| invalid(format!("config key `{key}`: {e}"))),
        }
    }

    /// Config-file table `[section]` with every flag that was given on the
    /// command line laid over it.
    pub fn layer<T: Serialize + DeserializeOwned>(&self, section: &str, flags: &T) -> CliResult<T> {
        let mut merged = match self.root.get(section) {
            None => serde_json::Value::Object(Default::default()),
            Some(toml::Value::Table(t)) => serde_json::to_value(t)?,
            Some(_) => return Err(invalid(format!("config: `{section}` must be a table"))),
        };
        let flags = serde_json::to_value(flags)?;
        if let (Some(dst), serde_json::Value::Object(src)) = (merged.as_object_mut(), flags) {
            for (k, v) in src {
                if !v.is_null() {
                    dst.insert(k, v);
                }
            }
        }
        serde_json::from_value(merged).map_err(|e| invalid(format!("config [{section}]: {e}")))
    }
}
