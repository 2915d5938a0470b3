//! Run manifests.
//!
//! A manifest is the resolved config echo preceded by `#`-comment metadata,
//! so the file itself is a valid config that reruns the experiment:
//!
//! ```text
//! # version = 0.1.0
//! # command = simulate
//! # output = run/trajectory.csv
//! # duration_s = 0.71
//! system = example
//! ...
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use ehgo_core::SimConfig;

use crate::config::{echo_config, parse_config, ConfigError};
use crate::output::IoError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: SimConfig,
    pub version: String,
    pub command: String,
    pub outputs: Vec<PathBuf>,
    pub duration: Duration,
}

impl RunManifest {
    pub fn new(config: SimConfig, command: impl Into<String>) -> Self {
        Self {
            config,
            version: VERSION.to_string(),
            command: command.into(),
            outputs: Vec::new(),
            duration: Duration::ZERO,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "# version = {}\n# command = {}\n",
            self.version, self.command
        );
        for path in &self.outputs {
            out.push_str(&format!("# output = {}\n", path.display()));
        }
        out.push_str(&format!(
            "# duration_s = {:.3}\n",
            self.duration.as_secs_f64()
        ));
        out.push_str(&echo_config(&self.config));
        out
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config = parse_config(text)?;
        let mut manifest = Self::new(config, "");
        manifest.version.clear();
        for (i, line) in text.lines().enumerate() {
            let Some(meta) = line.strip_prefix('#') else {
                continue;
            };
            let Some((key, value)) = meta.split_once('=') else {
                continue;
            };
            let value = value.trim();
            match key.trim() {
                "version" => manifest.version = value.to_string(),
                "command" => manifest.command = value.to_string(),
                "output" => manifest.outputs.push(PathBuf::from(value)),
                "duration_s" => {
                    let secs =
                        value
                            .parse::<f64>()
                            .ok()
                            .filter(|s| *s >= 0.0)
                            .ok_or_else(|| ConfigError {
                                line: Some(i + 1),
                                key: "duration_s".into(),
                                msg: format!("malformed duration '{value}'"),
                            })?;
                    manifest.duration = Duration::from_secs_f64(secs);
                }
                _ => {}
            }
        }
        Ok(manifest)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        fs::write(path, self.render()).map_err(|e| IoError::new(path, e))
    }
}
