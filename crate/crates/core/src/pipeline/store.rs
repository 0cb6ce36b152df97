//! Run-directory persistence: atomic file writes and per-stage manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Stage;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// What a stage consumed and produced. Paths inside the run directory are
/// stored relative to it, so two runs in different directories compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

/// Writer for one stage's directory.
pub struct StageWriter {
    root: PathBuf,
    stage: Stage,
    manifest: StageManifest,
}

impl StageWriter {
    /// Drops any previous manifest so an interrupted rerun never looks
    /// complete.
    pub fn begin(root: &Path, stage: Stage, config_sha256: &str) -> Result<Self> {
        let dir = root.join(stage.as_str());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let m = dir.join(MANIFEST);
        if m.exists() {
            fs::remove_file(&m).map_err(|e| Error::io(&m, e))?;
        }
        Ok(StageWriter {
            root: root.to_path_buf(),
            stage,
            manifest: StageManifest {
                stage: stage.as_str().to_string(),
                config_sha256: config_sha256.to_string(),
                ..Default::default()
            },
        })
    }

    /// A writer that only collects input hashes; used to read stage outputs
    /// outside a stage run. Never call `finish` on it.
    pub(super) fn detached(root: &Path) -> Self {
        StageWriter {
            root: root.to_path_buf(),
            stage: Stage::Report,
            manifest: StageManifest::default(),
        }
    }

    pub(super) fn record_input(&mut self, name: String, hash: String) {
        self.manifest.inputs.insert(name, hash);
    }

    pub fn dir(&self) -> PathBuf {
        self.root.join(self.stage.as_str())
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let hash = sha256_file(path)?;
        self.manifest.inputs.insert(display_path(&self.root, path), hash);
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir().join(name);
        write_atomic(&path, bytes)?;
        self.manifest.outputs.insert(name.to_string(), sha256_bytes(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes the manifest last; its presence marks the stage complete.
    pub fn finish(self) -> Result<StageManifest> {
        let path = self.dir().join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(self.manifest)
    }
}

/// `path` relative to `root` when it lies inside it, unchanged otherwise.
pub fn display_path(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

pub fn stage_complete(root: &Path, stage: Stage) -> bool {
    root.join(stage.as_str()).join(MANIFEST).is_file()
}

/// Path of a completed stage's output, or `MissingStage`.
pub fn require(root: &Path, stage: Stage, name: &str) -> Result<PathBuf> {
    let path = root.join(stage.as_str()).join(name);
    if !stage_complete(root, stage) || !path.is_file() {
        return Err(Error::MissingStage {
            stage: stage.as_str().to_string(),
        });
    }
    Ok(path)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
