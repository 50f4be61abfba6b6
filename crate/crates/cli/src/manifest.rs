//! Run manifests, artifact bookkeeping and the output-directory lock.

use std::fs::{self, File, OpenOptions};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Settings;

pub const MANIFEST_FILE: &str = "manifest.json";
const LOCK_FILE: &str = ".geoinfer.lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CommandSpec {
    SoilDemo,
    Impute {
        train: PathBuf,
        test: PathBuf,
        schema: PathBuf,
        truth: Option<PathBuf>,
    },
    Explain {
        run_dir: PathBuf,
    },
    Generate {
        n_train: usize,
        n_test: usize,
        missing_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandSpec,
    pub config: Settings,
    pub seed: u64,
    pub inputs: Vec<FileRecord>,
    /// Relative to the output directory.
    pub outputs: Vec<FileRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    /// Output files whose bytes differ from the recorded checksums in `dir`.
    pub fn mismatched_outputs(&self, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let mut bad = Vec::new();
        for rec in &self.outputs {
            let p = dir.join(&rec.path);
            if !p.exists() || sha256_file(&p)? != rec.sha256 {
                bad.push(rec.path.clone());
            }
        }
        Ok(bad)
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_bytes(&bytes))
}

pub fn input_record(path: &Path) -> anyhow::Result<FileRecord> {
    Ok(FileRecord {
        path: path.to_path_buf(),
        sha256: sha256_file(path)?,
    })
}

/// Exclusive writer for one output directory. Holds a lock file for its
/// lifetime and records a checksum for every artifact it writes.
pub struct OutDir {
    root: PathBuf,
    lock: PathBuf,
    outputs: Vec<FileRecord>,
}

impl OutDir {
    pub fn open(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let lock = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                bail!("{} is locked by another run (remove {} if stale)", root.display(), lock.display())
            }
            Err(e) => return Err(e).with_context(|| format!("creating lock in {}", root.display())),
        }
        Ok(OutDir {
            root: root.to_path_buf(),
            lock,
            outputs: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> anyhow::Result<()> {
        let rel = rel.as_ref();
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        log::debug!("wrote {}", path.display());
        self.outputs.push(FileRecord {
            path: rel.to_path_buf(),
            sha256: sha256_bytes(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    /// Writes the manifest and releases the lock.
    pub fn finish(mut self, command: CommandSpec, config: &Settings, inputs: Vec<FileRecord>) -> anyhow::Result<RunManifest> {
        let mut outputs = std::mem::take(&mut self.outputs);
        outputs.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = RunManifest {
            command,
            config: config.clone(),
            seed: config.seed,
            inputs,
            outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.root.join(MANIFEST_FILE);
        let mut f = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        std::io::Write::write_all(&mut f, text.as_bytes())?;
        Ok(manifest)
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = OutDir::open(dir.path()).unwrap();
        assert!(OutDir::open(dir.path()).is_err());
        drop(a);
        assert!(OutDir::open(dir.path()).is_ok());
    }

    #[test]
    fn manifest_records_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::open(dir.path()).unwrap();
        out.write("b/x.txt", b"hello").unwrap();
        out.write("a.txt", b"").unwrap();
        let m = out.finish(CommandSpec::SoilDemo, &Settings::default(), vec![]).unwrap();
        assert_eq!(m.outputs[0].path, PathBuf::from("a.txt"));
        assert_eq!(
            m.outputs[1].sha256,
            "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
        );
        assert!(m.mismatched_outputs(dir.path()).unwrap().is_empty());
        fs::write(dir.path().join("a.txt"), b"changed").unwrap();
        assert_eq!(m.mismatched_outputs(dir.path()).unwrap(), vec![PathBuf::from("a.txt")]);
        assert!(!dir.path().join(LOCK_FILE).exists());
        let back = RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(back, m);
    }
}
