//! Model checkpoints: a small self-describing binary format.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "BDPI"                      4-byte magic
//! version: u32                currently 1
//! meta_len: u32               length of the JSON metadata block
//! meta: [u8; meta_len]        JSON (model config, seed, vocab chars, ...)
//! tensor_count: u32
//! per tensor:
//!   name_len: u16, name: [u8] UTF-8; running stats carry a "running." prefix
//!   ndim: u8, dims: [u32]
//!   values: [f32]             row-major
//! ```
//!
//! Parameters are stored at f32 precision. Because the in-memory model snaps
//! every write to the f32 grid, save → load reproduces the parameters
//! bitwise. Writes go through a temp file in the destination directory and a
//! rename, so an interrupted save never leaves a half-written checkpoint at
//! the target path.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Values;
use crate::model::{ModelConfig, ModelError, ModelParams};

pub const MAGIC: &[u8; 4] = b"BDPI";
pub const VERSION: u32 = 1;
const RUNNING_PREFIX: &str = "running.";

/// Everything needed to rebuild and use the model besides the tensors.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckpointMeta {
    pub config: ModelConfig,
    pub seed: u64,
    pub best_epoch: usize,
    /// NaN-free encoding: absent when training never evaluated
    pub best_val_auc: Option<f64>,
    pub protein_vocab: String,
    pub smiles_vocab: String,
}

/// Metadata keys this version understands; anything else in the JSON block
/// produces a warning, not an error, so files from newer writers still load.
const KNOWN_META_KEYS: [&str; 6] =
    ["config", "seed", "best_epoch", "best_val_auc", "protein_vocab", "smiles_vocab"];

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint: bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {got} (this build reads {supported})")]
    BadVersion { got: u32, supported: u32 },
    #[error("truncated checkpoint: {context}")]
    Truncated { context: String },
    #[error("bad metadata: {0}")]
    BadMeta(#[from] serde_json::Error),
    #[error("tensor {name}: {msg}")]
    BadTensor { name: String, msg: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], context: &str) -> Result<(), CheckpointError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            CheckpointError::Truncated { context: context.to_string() }
        } else {
            CheckpointError::Io(e)
        }
    })
}

fn read_u32(r: &mut impl Read, context: &str) -> Result<u32, CheckpointError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, context)?;
    Ok(u32::from_le_bytes(b))
}

fn write_tensor(out: &mut impl Write, name: &str, values: &Values) -> std::io::Result<()> {
    let name_bytes = name.as_bytes();
    out.write_all(&(name_bytes.len() as u16).to_le_bytes())?;
    out.write_all(name_bytes)?;
    out.write_all(&[values.shape().len() as u8])?;
    for &d in values.shape() {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    for &x in values.data() {
        out.write_all(&(x as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    meta: &CheckpointMeta,
) -> Result<(), CheckpointError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let out = tmp.as_file_mut();
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        let meta_json = serde_json::to_vec(meta)?;
        out.write_all(&(meta_json.len() as u32).to_le_bytes())?;
        out.write_all(&meta_json)?;

        let running = params.running_stats();
        let count = params.names().len() + running.len();
        out.write_all(&(count as u32).to_le_bytes())?;
        for (name, values) in params.iter() {
            write_tensor(out, name, values)?;
        }
        for (name, values) in &running {
            write_tensor(out, &format!("{RUNNING_PREFIX}{name}"), values)?;
        }
        out.flush()?;
    }
    tmp.persist(path).map_err(|e| CheckpointError::Io(e.error))?;
    Ok(())
}

#[derive(Debug)]
pub struct LoadedCheckpoint {
    pub params: ModelParams,
    pub meta: CheckpointMeta,
    /// non-fatal observations (unknown metadata keys, ...)
    pub warnings: Vec<String>,
}

pub fn load_checkpoint(path: &Path) -> Result<LoadedCheckpoint, CheckpointError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);

    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = read_u32(&mut r, "version")?;
    if version != VERSION {
        return Err(CheckpointError::BadVersion { got: version, supported: VERSION });
    }

    let meta_len = read_u32(&mut r, "metadata length")? as usize;
    let mut meta_bytes = vec![0u8; meta_len];
    read_exact(&mut r, &mut meta_bytes, "metadata block")?;

    let mut warnings = Vec::new();
    let raw: serde_json::Value = serde_json::from_slice(&meta_bytes)?;
    if let Some(obj) = raw.as_object() {
        for key in obj.keys() {
            if !KNOWN_META_KEYS.contains(&key.as_str()) {
                warnings.push(format!("ignoring unknown metadata key {key:?}"));
            }
        }
    }
    let meta: CheckpointMeta = serde_json::from_value(raw)?;

    // materialize the skeleton from the stored config, then overwrite every
    // tensor; the seed only matters for tensors the file fails to mention,
    // and we error on those anyway
    let mut params = ModelParams::init(meta.config.clone(), meta.seed)?;
    let expected: std::collections::BTreeSet<String> = params
        .names()
        .into_iter()
        .chain(params.running_stats().keys().map(|k| format!("{RUNNING_PREFIX}{k}")))
        .collect();
    let mut seen = std::collections::BTreeSet::new();

    let tensor_count = read_u32(&mut r, "tensor count")? as usize;
    for t in 0..tensor_count {
        let mut len_bytes = [0u8; 2];
        read_exact(&mut r, &mut len_bytes, &format!("tensor {t} name length"))?;
        let name_len = u16::from_le_bytes(len_bytes) as usize;
        let mut name_bytes = vec![0u8; name_len];
        read_exact(&mut r, &mut name_bytes, &format!("tensor {t} name"))?;
        let name = String::from_utf8(name_bytes).map_err(|e| CheckpointError::BadTensor {
            name: format!("#{t}"),
            msg: format!("name is not UTF-8: {e}"),
        })?;

        let mut ndim = [0u8; 1];
        read_exact(&mut r, &mut ndim, &format!("tensor {name} rank"))?;
        let mut shape = Vec::with_capacity(ndim[0] as usize);
        for _ in 0..ndim[0] {
            shape.push(read_u32(&mut r, &format!("tensor {name} dims"))? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut buf = [0u8; 4];
        for i in 0..len {
            read_exact(&mut r, &mut buf, &format!("tensor {name} value {i}"))?;
            data.push(f64::from(f32::from_le_bytes(buf)));
        }
        let values = Values::new(shape, data);

        if !expected.contains(&name) {
            return Err(CheckpointError::BadTensor {
                name,
                msg: "not a tensor of this model configuration".to_string(),
            });
        }
        if !seen.insert(name.clone()) {
            return Err(CheckpointError::BadTensor {
                name,
                msg: "appears twice".to_string(),
            });
        }
        match name.strip_prefix(RUNNING_PREFIX) {
            Some(stat) => params.set_running(stat, values)?,
            None => params.set(&name, values)?,
        }
    }

    if seen.len() != expected.len() {
        let missing: Vec<String> = expected.difference(&seen).cloned().collect();
        return Err(CheckpointError::Truncated {
            context: format!("missing tensors: {}", missing.join(", ")),
        });
    }

    // trailing garbage would mean a format mismatch somewhere
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => {}
        _ => {
            warnings.push("checkpoint has trailing bytes after the last tensor".to_string());
        }
    }

    Ok(LoadedCheckpoint { params, meta, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens;

    fn small_params(seed: u64) -> (ModelParams, CheckpointMeta) {
        let config = ModelConfig {
            embed_dim: 6,
            protein_mlp_widths: vec![8, 6],
            drug_mlp_widths: vec![8, 6],
            gnn_layers: 1,
            head_layers: 2,
            hyper_nodes: 2,
            token_embed_dim: 4,
            protein_conv_kernel: 3,
            drug_conv_kernel: 3,
            protein_max_len: 8,
            drug_max_len: 6,
            kmer_dim: 10,
            fingerprint_bits: 8,
            ..ModelConfig::default()
        };
        let params = ModelParams::init(config.clone(), seed).unwrap();
        let meta = CheckpointMeta {
            config,
            seed,
            best_epoch: 3,
            best_val_auc: Some(0.91),
            protein_vocab: tokens::protein_vocabulary().chars().to_string(),
            smiles_vocab: tokens::smiles_vocabulary().chars().to_string(),
        };
        (params, meta)
    }

    #[test]
    fn round_trip_is_bitwise() {
        let (params, meta) = small_params(5);
        // make the running stats non-trivial so the test covers them
        params.update_running("protein_mlp.0", &[0.5; 8], &[2.0; 8]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &params, &meta).unwrap();

        let loaded = load_checkpoint(&path).unwrap();
        assert!(loaded.warnings.is_empty());
        assert_eq!(loaded.meta, meta);
        for name in params.names() {
            assert_eq!(
                params.get(&name).unwrap().data(),
                loaded.params.get(&name).unwrap().data(),
                "{name}"
            );
        }
        let a = params.running_stats();
        let b = loaded.params.running_stats();
        assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
        for (k, v) in &a {
            assert_eq!(v.data(), b[k].data(), "{k}");
        }
    }

    #[test]
    fn save_load_save_produces_identical_bytes() {
        let (params, meta) = small_params(8);
        let dir = tempfile::tempdir().unwrap();
        let first = dir.path().join("a.ckpt");
        let second = dir.path().join("b.ckpt");
        save_checkpoint(&first, &params, &meta).unwrap();
        let loaded = load_checkpoint(&first).unwrap();
        save_checkpoint(&second, &loaded.params, &loaded.meta).unwrap();
        assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"NOPE plus some other stuff").unwrap();
        assert!(matches!(load_checkpoint(&path), Err(CheckpointError::BadMagic(_))));
    }

    #[test]
    fn future_version_is_rejected() {
        let (params, meta) = small_params(2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v9.ckpt");
        save_checkpoint(&path, &params, &meta).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4..8].copy_from_slice(&9u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::BadVersion { got: 9, .. })
        ));
    }

    #[test]
    fn truncation_is_detected_at_any_cut() {
        let (params, meta) = small_params(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("full.ckpt");
        save_checkpoint(&path, &params, &meta).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut_path = dir.path().join("cut.ckpt");
        // a spread of prefix lengths: inside magic, metadata, names, values
        for frac in [1usize, 3, 7, 40, 60, 85, 99] {
            let cut = bytes.len() * frac / 100;
            std::fs::write(&cut_path, &bytes[..cut]).unwrap();
            let err = load_checkpoint(&cut_path).unwrap_err();
            assert!(
                matches!(
                    err,
                    CheckpointError::Truncated { .. }
                        | CheckpointError::BadMeta(_)
                        | CheckpointError::BadMagic(_)
                ),
                "cut at {cut}/{} gave {err:?}",
                bytes.len()
            );
        }
    }

    #[test]
    fn unknown_metadata_key_warns_but_loads() {
        let (params, meta) = small_params(4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("extra.ckpt");
        save_checkpoint(&path, &params, &meta).unwrap();

        // splice an extra key into the JSON block
        let bytes = std::fs::read(&path).unwrap();
        let meta_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut meta_json: serde_json::Value =
            serde_json::from_slice(&bytes[12..12 + meta_len]).unwrap();
        meta_json["from_the_future"] = serde_json::json!(true);
        let new_meta = serde_json::to_vec(&meta_json).unwrap();
        let mut patched = Vec::new();
        patched.extend_from_slice(&bytes[..8]);
        patched.extend_from_slice(&(new_meta.len() as u32).to_le_bytes());
        patched.extend_from_slice(&new_meta);
        patched.extend_from_slice(&bytes[12 + meta_len..]);
        std::fs::write(&path, patched).unwrap();

        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        assert!(loaded.warnings[0].contains("from_the_future"));
        assert_eq!(loaded.meta.seed, meta.seed);
    }

    #[test]
    fn tensor_from_another_architecture_is_rejected() {
        let (params, meta) = small_params(6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&path, &params, &meta).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // corrupt the first tensor's name in place (same length)
        let meta_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let name_start = 12 + meta_len + 4 + 2;
        let name_len = u16::from_le_bytes(
            bytes[12 + meta_len + 4..12 + meta_len + 6].try_into().unwrap(),
        ) as usize;
        for b in &mut bytes[name_start..name_start + name_len] {
            *b = b'z';
        }
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(CheckpointError::BadTensor { .. })
        ));
    }
}
