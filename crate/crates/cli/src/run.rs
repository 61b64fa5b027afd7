//! Per-invocation run directories holding a config copy and a manifest.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct FileHash {
    pub path: PathBuf,
    /// SHA-256 of the file, or of the sorted `path hash` listing for a
    /// directory.
    pub sha256: String,
    pub files: usize,
}

fn hash_file(path: &Path) -> anyhow::Result<String> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).with_context(|| format!("reading {}", path.display()))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("{:x}", h.finalize()))
}

pub fn hash_path(path: &Path) -> anyhow::Result<FileHash> {
    if path.is_file() {
        return Ok(FileHash {
            path: path.to_path_buf(),
            sha256: hash_file(path)?,
            files: 1,
        });
    }
    let mut entries = Vec::new();
    for e in WalkDir::new(path).sort_by_file_name() {
        let e = e.with_context(|| format!("listing {}", path.display()))?;
        if e.file_type().is_file() {
            let rel = e.path().strip_prefix(path).unwrap_or(e.path());
            entries.push(format!("{} {}\n", rel.display(), hash_file(e.path())?));
        }
    }
    Ok(FileHash {
        path: path.to_path_buf(),
        sha256: format!("{:x}", Sha256::digest(entries.concat().as_bytes())),
        files: entries.len(),
    })
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub seed: u64,
    pub exec: String,
    pub config_sha256: String,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    /// Command-specific facts, e.g. thresholds or counts.
    pub details: serde_json::Map<String, serde_json::Value>,
    pub determinism: &'static str,
}

pub struct RunDir {
    pub path: PathBuf,
    pub manifest: Manifest,
}

const DETERMINISM: &str = "parallel and sequential execution merge results in input order; \
outputs are bit-identical for a given seed on the same build";

impl RunDir {
    /// `out`, or a fresh timestamped directory under the configured runs
    /// directory.
    pub fn create(command: &str, cfg: &RunConfig, out: Option<&Path>) -> anyhow::Result<Self> {
        let path = match out {
            Some(p) => p.to_path_buf(),
            None => {
                let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
                let base = cfg.paths.runs_dir.join(format!("{command}-{stamp}"));
                let mut p = base.clone();
                let mut i = 1;
                while p.exists() {
                    p = PathBuf::from(format!("{}-{i}", base.display()));
                    i += 1;
                }
                p
            }
        };
        fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        let text = cfg.to_toml()?;
        fs::write(path.join("config.toml"), &text).context("writing config copy")?;
        Ok(RunDir {
            manifest: Manifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION"),
                seed: cfg.seed,
                exec: format!("{:?}", cfg.mode()).to_lowercase(),
                config_sha256: format!("{:x}", Sha256::digest(text.as_bytes())),
                inputs: Vec::new(),
                outputs: Vec::new(),
                details: Default::default(),
                determinism: DETERMINISM,
            },
            path,
        })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn input(&mut self, p: &Path) -> anyhow::Result<()> {
        self.manifest.inputs.push(hash_path(p)?);
        Ok(())
    }

    pub fn output(&mut self, p: &Path) -> anyhow::Result<()> {
        self.manifest.outputs.push(hash_path(p)?);
        Ok(())
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("plain data");
        self.manifest.details.insert(key.into(), v);
    }

    pub fn finish(self) -> anyhow::Result<PathBuf> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(self.path.join("manifest.json"), text + "\n").context("writing manifest")?;
        Ok(self.path)
    }
}
