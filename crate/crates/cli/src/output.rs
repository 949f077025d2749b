//! Buffered run artifacts. Nothing touches the disk until a command has
//! finished, so a failed run leaves no partial files behind.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// One output file held in memory.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn text(name: impl Into<String>, text: String) -> Self {
        Self {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }

    pub fn json<T: Serialize>(name: impl Into<String>, value: &T) -> Self {
        let mut text = serde_json::to_string_pretty(value).expect("summary is serializable");
        text.push('\n');
        Self::text(name, text)
    }
}

/// 12 significant digits, fixed exponent form.
pub fn num(v: f64) -> String {
    format!("{v:.11e}")
}

/// Column-oriented CSV with a header row.
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn numbers(&mut self, values: &[f64]) {
        self.row(values.iter().map(|&v| num(v)).collect());
    }

    pub fn into_artifact(self, name: &str) -> Artifact {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        Artifact::text(name, out)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

#[derive(Debug, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config_sha256: String,
    pub backend: String,
    pub seed: u64,
    pub wall_clock_s: f64,
    pub files: Vec<ManifestEntry>,
}

/// Manifest file name for a subcommand, e.g. `manifest_simulate_tim.json`.
pub fn manifest_name(subcommand: &str) -> String {
    format!("manifest_{}.json", subcommand.replace(' ', "_"))
}

pub struct RunInfo<'a> {
    pub subcommand: String,
    pub config_toml: &'a str,
    pub backend: String,
    pub seed: u64,
    pub elapsed: Duration,
}

/// Writes every artifact and then the manifest that lists them.
pub fn write_run(dir: &Path, artifacts: &[Artifact], info: RunInfo<'_>) -> Result<RunManifest, CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let mut files = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(io(&path))?;
        files.push(ManifestEntry {
            name: a.name.clone(),
            bytes: a.bytes.len(),
            sha256: sha256_hex(&a.bytes),
        });
    }
    let name = manifest_name(&info.subcommand);
    let manifest = RunManifest {
        tool: "spinqudit",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: info.subcommand,
        config_sha256: sha256_hex(info.config_toml.as_bytes()),
        backend: info.backend,
        seed: info.seed,
        wall_clock_s: info.elapsed.as_secs_f64(),
        files,
    };
    let m = Artifact::json(&name, &manifest);
    let path = dir.join(&name);
    fs::write(&path, &m.bytes).map_err(io(&path))?;
    Ok(manifest)
}
