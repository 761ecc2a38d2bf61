//! Parameter archives: a JSON manifest next to a little-endian f64 blob.
//!
//! `<name>.json` holds the network spec, seed, parameter shapes, blob length
//! and SHA-256, plus free-form metadata. `<name>.bin` holds every parameter
//! tensor concatenated in node order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{NnError, Result};
use crate::network::{Network, NetworkSpec};
use crate::tensor::Tensor;

pub const ARCHIVE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveManifest {
    pub format_version: u32,
    pub spec: NetworkSpec,
    pub seed: u64,
    pub param_shapes: Vec<Vec<Vec<usize>>>,
    /// Number of f64 values in the blob.
    pub blob_len: usize,
    pub blob_sha256: String,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

fn paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.json")), dir.join(format!("{name}.bin")))
}

fn encode(params: &[Vec<Tensor>]) -> Vec<u8> {
    let mut out = Vec::new();
    for t in params.iter().flatten() {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Write `net` as `<dir>/<name>.json` + `<dir>/<name>.bin`.
pub fn save_archive(net: &Network, metadata: serde_json::Value, dir: &Path, name: &str) -> Result<ArchiveManifest> {
    fs::create_dir_all(dir)?;
    let blob = encode(net.params());
    let manifest = ArchiveManifest {
        format_version: ARCHIVE_FORMAT_VERSION,
        spec: net.spec().clone(),
        seed: net.seed(),
        param_shapes: net.param_shapes(),
        blob_len: blob.len() / 8,
        blob_sha256: hex::encode(Sha256::digest(&blob)),
        metadata,
    };
    let (json_path, bin_path) = paths(dir, name);
    fs::write(&bin_path, &blob)?;
    fs::write(&json_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Read an archive back, checking the blob hash and every parameter shape.
pub fn load_archive(dir: &Path, name: &str) -> Result<(Network, ArchiveManifest)> {
    let (json_path, bin_path) = paths(dir, name);
    let manifest: ArchiveManifest = serde_json::from_str(&fs::read_to_string(&json_path)?)?;
    if manifest.format_version != ARCHIVE_FORMAT_VERSION {
        return Err(NnError::Archive(format!(
            "{}: unsupported format version {}",
            json_path.display(),
            manifest.format_version
        )));
    }
    let blob = fs::read(&bin_path)?;
    if blob.len() != manifest.blob_len * 8 {
        return Err(NnError::Archive(format!(
            "{}: expected {} values, found {} bytes",
            bin_path.display(),
            manifest.blob_len,
            blob.len()
        )));
    }
    let digest = hex::encode(Sha256::digest(&blob));
    if digest != manifest.blob_sha256 {
        return Err(NnError::Archive(format!("{}: sha256 mismatch", bin_path.display())));
    }

    let mut net = Network::new(manifest.spec.clone(), manifest.seed)?;
    let expected = net.param_shapes();
    if expected != manifest.param_shapes {
        return Err(NnError::Archive("parameter shapes do not match the network spec".into()));
    }
    let mut values = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut params = Vec::with_capacity(expected.len());
    for node in &expected {
        let mut tensors = Vec::with_capacity(node.len());
        for shape in node {
            let n: usize = shape.iter().product();
            let data: Vec<f64> = values.by_ref().take(n).collect();
            if data.len() != n {
                return Err(NnError::Archive("blob shorter than the parameter shapes".into()));
            }
            tensors.push(Tensor::new(shape.clone(), data)?);
        }
        params.push(tensors);
    }
    if values.next().is_some() {
        return Err(NnError::Archive("blob longer than the parameter shapes".into()));
    }
    net.set_params(params)?;
    Ok((net, manifest))
}
