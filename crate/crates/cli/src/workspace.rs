//! Flat workspace directory: fixed artifact names, atomic writes, a lock file
//! and a manifest of what each stage consumed and produced.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::usage;

pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".docflow.lock";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub status: StageStatus,
    pub config_hash: String,
    /// Input name (artifact file name or external path) to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub duration_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

pub struct Workspace {
    dir: PathBuf,
}

/// Held for the duration of a command; removes the lock file on drop.
pub struct WorkspaceLock {
    path: PathBuf,
}

impl Drop for WorkspaceLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

impl Workspace {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating workspace {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn lock(&self) -> Result<WorkspaceLock> {
        let path = self.path(LOCK);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(WorkspaceLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                let holder = fs::read_to_string(&path).unwrap_or_default();
                Err(usage(format!(
                    "workspace {} is locked by process {} (delete {} if no run is active)",
                    self.dir.display(),
                    holder.trim(),
                    path.display()
                )))
            }
            Err(e) => Err(e).with_context(|| format!("creating {}", path.display())),
        }
    }

    /// Path of an upstream artifact, or an error naming the missing file.
    pub fn require(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let path = self.path(name);
        if path.is_file() {
            Ok(path)
        } else {
            Err(anyhow!(
                "missing input {} (expected at {}); run `docflow {producer}` first",
                name,
                path.display()
            ))
        }
    }

    /// Writes `name` through a temporary file in the workspace and renames it
    /// into place, so a failed write never leaves a partial artifact.
    pub fn write_atomic<F>(&self, name: &str, fill: F) -> Result<()>
    where
        F: FnOnce(&mut dyn Write) -> Result<()>,
    {
        let tmp = tempfile::NamedTempFile::new_in(&self.dir).context("creating temporary file")?;
        {
            let mut out = BufWriter::new(tmp.as_file());
            fill(&mut out).with_context(|| format!("writing {name}"))?;
            out.flush()?;
        }
        tmp.as_file().sync_all()?;
        tmp.persist(self.path(name))
            .map_err(|e| e.error)
            .with_context(|| format!("moving {name} into place"))?;
        Ok(())
    }

    pub fn load_manifest(&self) -> Result<Manifest> {
        let path = self.path(MANIFEST);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn save_manifest(&self, manifest: &Manifest) -> Result<()> {
        self.write_atomic(MANIFEST, |w| {
            serde_json::to_writer_pretty(&mut *w, manifest)?;
            w.write_all(b"\n")?;
            Ok(())
        })
    }

    pub fn hash_outputs(&self, names: &[&str]) -> Result<BTreeMap<String, String>> {
        names
            .iter()
            .map(|n| Ok((n.to_string(), hash_file(&self.path(n))?)))
            .collect()
    }

    /// True when every recorded output is still on disk unchanged.
    pub fn outputs_intact(&self, record: &StageRecord) -> bool {
        record
            .outputs
            .iter()
            .all(|(name, hash)| hash_file(&self.path(name)).is_ok_and(|h| &h == hash))
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String> {
    let mut file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Hash of a file, or of every regular file in a directory (sorted by name).
pub fn hash_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        let mut hasher = Sha256::new();
        for e in entries {
            hasher.update(e.file_name().unwrap_or_default().as_encoded_bytes());
            hasher.update(hash_file(&e)?.as_bytes());
        }
        Ok(hex::encode(hasher.finalize()))
    } else {
        hash_file(path)
    }
}
