//! Output files, run manifests, and number formatting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// 17 significant digits; parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub parameters: serde_json::Value,
    pub outputs: Vec<OutputFile>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Versions {
    pub matcons: String,
    pub cli: String,
}

impl Default for Versions {
    fn default() -> Self {
        Self { matcons: matcons::VERSION.into(), cli: env!("CARGO_PKG_VERSION").into() }
    }
}

/// Collects files written into one output directory, optional when no
/// directory was requested.
pub struct OutputDir {
    root: Option<PathBuf>,
    files: Vec<OutputFile>,
    started: Instant,
}

impl OutputDir {
    pub fn new(root: Option<&Path>) -> Result<Self, CliError> {
        if let Some(root) = root {
            std::fs::create_dir_all(root).map_err(|source| CliError::Io { path: root.to_path_buf(), source })?;
        }
        Ok(Self { root: root.map(Path::to_path_buf), files: Vec::new(), started: Instant::now() })
    }

    pub fn required(root: Option<&Path>, command: &str) -> Result<Self, CliError> {
        if root.is_none() {
            return Err(CliError::Usage(format!("{command} needs --out DIR")));
        }
        Self::new(root)
    }

    pub fn is_enabled(&self) -> bool {
        self.root.is_some()
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let Some(root) = &self.root else {
            return Ok(());
        };
        let path = root.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })?;
        self.files.push(OutputFile { path: name.into(), sha256: sha256_hex(contents) });
        Ok(())
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish<C: Serialize, P: Serialize>(self, command: &str, config: &C, seed: Option<u64>, parameters: &P) -> Result<RunManifest, CliError> {
        let config_json = serde_json::to_vec(config).expect("config serializes");
        let manifest = RunManifest {
            command: command.into(),
            config_digest: sha256_hex(&config_json),
            seed,
            versions: Versions::default(),
            parameters: serde_json::to_value(parameters).expect("parameters serialize"),
            outputs: self.files,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        if let Some(root) = &self.root {
            let path = root.join("manifest.json");
            let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            std::fs::write(&path, text).map_err(|source| CliError::Io { path, source })?;
        }
        Ok(manifest)
    }
}

/// Two-column `quantity,value` report.
#[derive(Debug, Default, Clone)]
pub struct Report {
    rows: Vec<(String, String)>,
}

impl Report {
    pub fn number(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.rows.push((key.into(), num(value)));
        self
    }

    pub fn text(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.rows.push((key.into(), value.into()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.rows.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("quantity,value\n");
        for (k, v) in &self.rows {
            let _ = writeln!(s, "{k},{v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn digest_of_empty_input() {
        assert_eq!(sha256_hex(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
