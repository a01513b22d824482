//! Model checkpoint directory: `params.txt` (the numkernel text container)
//! and `manifest.json` (architecture, scheme, vocabulary, config, hash).

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Model, ModelConfig, Vocabulary};
use crate::corpus::LabelScheme;
use crate::error::{Error, Result};
use crate::numkernel::ParamStore;

pub const PARAMS_FILE: &str = "params.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub scheme: LabelScheme,
    pub config: ModelConfig,
    pub seed: u64,
    pub config_hash: String,
    pub params_sha256: String,
    pub vocab: Vocabulary,
}

/// SHA-256 over the canonical JSON of (scheme, config, vocabulary).
pub fn config_hash(scheme: LabelScheme, config: &ModelConfig, vocab: &Vocabulary) -> String {
    let canonical = serde_json::to_string(&(scheme, config, vocab)).expect("serializable");
    hex(&Sha256::digest(canonical.as_bytes()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_model(model: &Model, dir: impl AsRef<Path>) -> Result<ModelManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let params = model.store().to_checkpoint_text();
    let manifest = ModelManifest {
        format_version: FORMAT_VERSION,
        scheme: model.scheme(),
        config: model.config().clone(),
        seed: model.seed(),
        config_hash: config_hash(model.scheme(), model.config(), model.vocab()),
        params_sha256: hex(&Sha256::digest(params.as_bytes())),
        vocab: model.vocab().clone(),
    };
    let p = dir.join(PARAMS_FILE);
    std::fs::write(&p, params).map_err(|e| Error::io(&p, e))?;
    let m = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&m, json + "\n").map_err(|e| Error::io(&m, e))?;
    Ok(manifest)
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<Model> {
    let dir = dir.as_ref();
    let m = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&m).map_err(|e| Error::io(&m, e))?;
    let manifest: ModelManifest = serde_json::from_str(&text)?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported checkpoint version {}",
            manifest.format_version
        )));
    }
    let expected = config_hash(manifest.scheme, &manifest.config, &manifest.vocab);
    if expected != manifest.config_hash {
        return Err(Error::Config(format!("{} config hash mismatch", m.display())));
    }
    let p = dir.join(PARAMS_FILE);
    let params = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
    if hex(&Sha256::digest(params.as_bytes())) != manifest.params_sha256 {
        return Err(Error::Config(format!("{} does not match its manifest", p.display())));
    }
    let store = ParamStore::from_checkpoint_text(&params)?;
    Model::from_parts(manifest.config, manifest.scheme, manifest.vocab, store, manifest.seed)
}
