//! Output directories: every file written is hashed into `manifest.json`,
//! next to the `run.cfg` that reproduces it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const RUN_CONFIG: &str = "run.cfg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub versions: BTreeMap<String, String>,
    pub seed: u64,
    pub config_hash: String,
    /// Every recorded configuration key, as in `run.cfg`.
    pub config: BTreeMap<String, String>,
    /// sha256 of each input file.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of each artifact, by path relative to the directory.
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub struct OutputDir {
    root: PathBuf,
    artifacts: BTreeMap<String, String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            artifacts: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes.as_ref()).map_err(|e| Error::io(&path, e))?;
        self.artifacts.insert(name.to_string(), sha256_hex(bytes.as_ref()));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, text)
    }

    /// Records a file some other writer put under the directory.
    pub fn record(&mut self, name: &str) -> Result<()> {
        let hash = sha256_file(&self.path(name))?;
        self.artifacts.insert(name.to_string(), hash);
        Ok(())
    }

    pub fn finish(self, command: &str, config: &RunConfig) -> Result<RunManifest> {
        let mut inputs = BTreeMap::new();
        for (key, value) in config.pairs() {
            if matches!(key, "file" | "train" | "dev" | "test" | "meta" | "embeddings") && !value.is_empty() {
                inputs.insert(key.to_string(), sha256_file(Path::new(&value))?);
            }
            if key == "model" && !value.is_empty() {
                let dir = Path::new(&value);
                for f in [crate::models::MANIFEST_FILE, crate::models::PARAMS_FILE] {
                    inputs.insert(format!("model/{f}"), sha256_file(&dir.join(f))?);
                }
            }
        }
        let cfg_path = self.path(RUN_CONFIG);
        let manifest_path = self.path(MANIFEST);
        fs::write(&cfg_path, config.render()).map_err(|e| Error::io(&cfg_path, e))?;
        let manifest = RunManifest {
            command: command.to_string(),
            versions: BTreeMap::from([
                ("refsel".to_string(), env!("CARGO_PKG_VERSION").to_string()),
                ("checkpoint".to_string(), crate::numkernel::CHECKPOINT_MAGIC.to_string()),
            ]),
            seed: config.seed,
            config_hash: config.hash(),
            config: config
                .recorded_pairs()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            inputs,
            artifacts: self.artifacts,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
        Ok(manifest)
    }
}

/// Paths of artifacts whose current contents differ from the manifest.
pub fn verify(dir: &Path, manifest: &RunManifest) -> Result<Vec<String>> {
    let mut changed = Vec::new();
    for (name, hash) in &manifest.artifacts {
        let path = dir.join(name);
        match fs::read(&path) {
            Ok(bytes) if sha256_hex(&bytes) == *hash => {}
            Ok(_) => changed.push(name.clone()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => changed.push(name.clone()),
            Err(e) => return Err(Error::io(path, e)),
        }
    }
    Ok(changed)
}
