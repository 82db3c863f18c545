//! Run manifests.
//!
//! Every command that writes files also writes `run.json` beside them. It
//! records the subcommand with every option resolved, the seed, content
//! digests of all inputs and outputs, and the tool version. `emoprobe replay`
//! re-runs the command from the manifest alone and compares digests.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const RUN_MANIFEST_FILE: &str = "run.json";
pub const RUN_MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Inputs: the absolute path read. Outputs: the path relative to the
    /// manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: String,
    pub subcommand: String,
    /// Command-line arguments after the subcommand, excluding `--out`, with
    /// defaults filled in and paths made absolute.
    pub args: Vec<String>,
    /// The resolved configuration as the library sees it.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_inputs(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.to_string_lossy().into_owned(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// Digests `paths`, recording each relative to `out_dir`.
pub fn digest_outputs(out_dir: &Path, paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            let rel = p.strip_prefix(out_dir).unwrap_or(p);
            Ok(FileDigest {
                path: rel.to_string_lossy().into_owned(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        args: Vec<String>,
        config: serde_json::Value,
        seed: Option<u64>,
    ) -> Self {
        Self {
            manifest_version: RUN_MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            args,
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join(RUN_MANIFEST_FILE);
        let mut json = serde_json::to_vec_pretty(self).expect("serializable");
        json.push(b'\n');
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_slice(&bytes).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if m.manifest_version != RUN_MANIFEST_VERSION {
            return Err(Error::Json {
                path: path.to_path_buf(),
                message: format!(
                    "run manifest version {}, expected {RUN_MANIFEST_VERSION}",
                    m.manifest_version
                ),
            });
        }
        Ok(m)
    }

    /// Checks that every recorded input still has its recorded digest.
    pub fn verify_inputs(&self) -> Result<()> {
        for input in &self.inputs {
            let actual = sha256_file(Path::new(&input.path))?;
            if actual != input.sha256 {
                return Err(Error::DigestMismatch {
                    name: input.path.clone(),
                    recorded: input.sha256.clone(),
                    actual,
                });
            }
        }
        Ok(())
    }
}
