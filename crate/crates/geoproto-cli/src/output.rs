use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Effective;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading input {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// First line of every CSV output: the seed and effective-config hash, as a
/// comment the ingestion reader skips.
pub fn csv_banner(seed: Option<u64>, config_sha256: &str) -> String {
    match seed {
        Some(seed) => format!("# geoproto seed={seed} config=sha256:{config_sha256}\n"),
        None => format!("# geoproto config=sha256:{config_sha256}\n"),
    }
}

/// Collects output files for one run and writes them atomically (temp file
/// in the target directory, then rename), finishing with run-manifest.json.
pub struct RunWriter {
    dir: PathBuf,
    seed: Option<u64>,
    config_sha256: String,
    effective: Effective,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    seed: Option<u64>,
    config_sha256: &'a str,
    effective_config: &'a Effective,
    inputs: &'a [FileEntry],
    outputs: &'a [FileEntry],
}

impl RunWriter {
    pub fn new(dir: &Path, seed: Option<u64>, effective: Effective) -> Result<RunWriter> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let canonical = serde_json::to_vec(&effective).context("encoding effective config")?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            seed,
            config_sha256: sha256_hex(&canonical),
            effective,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn banner(&self) -> String {
        csv_banner(self.seed, &self.config_sha256)
    }

    /// Records an input file (hashed) in the manifest.
    pub fn note_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileEntry {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Writes one output file atomically and records it in the manifest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("creating temp file in {}", self.dir.display()))?;
        tmp.write_all(bytes)
            .and_then(|()| tmp.as_file_mut().sync_all())
            .with_context(|| format!("writing {}", target.display()))?;
        tmp.persist(&target)
            .with_context(|| format!("renaming into {}", target.display()))?;
        self.outputs.push(FileEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        log::info!("wrote {}", target.display());
        Ok(())
    }

    /// Serializes a document as pretty JSON wrapped with the seed and config
    /// hash, and writes it as an output file.
    pub fn write_json<T: Serialize>(&mut self, name: &str, doc: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Stamped<'a, T> {
            seed: Option<u64>,
            config_sha256: &'a str,
            #[serde(flatten)]
            doc: &'a T,
        }
        let mut bytes = serde_json::to_vec_pretty(&Stamped {
            seed: self.seed,
            config_sha256: &self.config_sha256,
            doc,
        })
        .with_context(|| format!("encoding {name}"))?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Writes run-manifest.json; call last so it covers every output.
    pub fn finish(self) -> Result<()> {
        let manifest = Manifest {
            tool: "geoproto",
            version: env!("CARGO_PKG_VERSION"),
            seed: self.seed,
            config_sha256: &self.config_sha256,
            effective_config: &self.effective,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).context("encoding manifest")?;
        bytes.push(b'\n');

        let target = self.dir.join("run-manifest.json");
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("creating temp file in {}", self.dir.display()))?;
        tmp.write_all(&bytes)
            .and_then(|()| tmp.as_file_mut().sync_all())
            .with_context(|| format!("writing {}", target.display()))?;
        tmp.persist(&target)
            .with_context(|| format!("renaming into {}", target.display()))?;
        log::info!("wrote {}", target.display());
        Ok(())
    }
}
