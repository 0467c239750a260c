//! Layered configuration: defaults or a dataset preset, then a TOML file,
//! then command-line flags.
//!
//! A config file may name a preset and carry `[train]` and `[explain]`
//! tables whose keys are the fields of the corresponding library config:
//!
//! ```toml
//! preset = "tree-grid"
//!
//! [explain]
//! epochs = 300
//! extraction = { mode = "threshold", t = 0.5 }
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use pnsx::presets::Preset;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub preset: Option<String>,
    pub train: Option<toml::Table>,
    pub explain: Option<toml::Table>,
}

impl ConfigFile {
    pub fn read(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// The flag wins over the file.
    pub fn preset(&self, flag: Option<&str>) -> Result<Option<Preset>> {
        match flag.or(self.preset.as_deref()) {
            Some(name) => Ok(Some(name.parse()?)),
            None => Ok(None),
        }
    }
}

/// Replaces the fields of `base` named in `overlay`.
pub fn overlay<T: Serialize + DeserializeOwned>(base: &T, overlay: Option<&toml::Table>) -> Result<T> {
    let Some(overlay) = overlay else {
        return Ok(toml::Value::try_from(base)?.try_into()?);
    };
    let toml::Value::Table(mut table) = toml::Value::try_from(base)? else {
        bail!("configuration is not a table");
    };
    for (k, v) in overlay {
        table.insert(k.clone(), v.clone());
    }
    toml::Value::Table(table).try_into().context("invalid configuration value")
}
