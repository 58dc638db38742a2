//! Output files and the run manifest. Nothing is written until every file
//! has been produced.

use std::fs;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Default)]
pub struct Outputs {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    /// Short human-readable lines printed to stdout.
    pub summary: Vec<String>,
}

impl Outputs {
    pub fn file(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }
}

#[derive(Serialize)]
struct FileEntry<'a> {
    file: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    config_sha256: String,
    versions: Versions,
    config: &'a RunConfig,
    outputs: Vec<FileEntry<'a>>,
}

#[derive(Serialize)]
struct Versions {
    #[serde(rename = "phonon-qsim")]
    library: &'static str,
    #[serde(rename = "phonon-qsim-cli")]
    cli: &'static str,
}

fn sha256(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Write every output and `manifest.json`; returns the number of files.
pub fn write(cfg: &RunConfig, command: &str, outputs: &Outputs) -> Result<usize> {
    let manifest = Manifest {
        command,
        seed: cfg.seed,
        config_sha256: sha256(&cfg.canonical()),
        versions: Versions {
            library: phonon_qsim::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        config: cfg,
        outputs: outputs
            .files
            .iter()
            .map(|(name, body)| FileEntry { file: name, sha256: sha256(body) })
            .collect(),
    };
    let manifest = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    for (name, body) in outputs.files.iter().chain([&("manifest.json".to_string(), manifest)]) {
        let path = cfg.out.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(outputs.files.len() + 1)
}
