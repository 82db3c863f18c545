//! Probe checkpoints.
//!
//! A checkpoint is a directory:
//!
//! ```text
//! ckpt/
//!   meta.json     dims, temperature, config, trace, provenance
//!   w_label.embd  EMBD, dtype float64, d_p rows of d
//!   w_event.embd  EMBD, dtype float64, d_p rows of d
//! ```
//!
//! Weights are stored as float64 so a load returns the trained parameters
//! bit for bit. Floats in `meta.json` are written with shortest round-trip
//! formatting and read back exactly.

use std::path::{Path, PathBuf};

use emoprobe_core::corpus::Split;
use emoprobe_core::format;
use emoprobe_core::linalg::Matrix;
use emoprobe_core::probe::{EpochRecord, ProbeParameters, TrainConfig, TrainedProbe};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;
pub const META_FILE: &str = "meta.json";
pub const W_LABEL_FILE: &str = "w_label.embd";
pub const W_EVENT_FILE: &str = "w_event.embd";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub input_dim: usize,
    pub projection_dim: usize,
    pub temperature: f64,
    pub config: TrainConfig,
    pub initial_valid_loss: f64,
    pub selected_epoch: usize,
    pub stopped_epoch: usize,
    pub monitor_split: Split,
    pub corpus_tag: String,
    pub model_tag: String,
    pub trace: Vec<EpochRecord>,
}

impl CheckpointMeta {
    pub fn of(probe: &TrainedProbe) -> Self {
        let p = &probe.parameters;
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            input_dim: p.input_dim(),
            projection_dim: p.projection_dim(),
            temperature: p.temperature(),
            config: probe.config.clone(),
            initial_valid_loss: probe.initial_valid_loss,
            selected_epoch: probe.selected_epoch,
            stopped_epoch: probe.stopped_epoch,
            monitor_split: probe.monitor_split,
            corpus_tag: probe.corpus_tag.clone(),
            model_tag: probe.model_tag.clone(),
            trace: probe.trace.clone(),
        }
    }
}

pub fn checkpoint_files(dir: &Path) -> [PathBuf; 3] {
    [
        dir.join(META_FILE),
        dir.join(W_LABEL_FILE),
        dir.join(W_EVENT_FILE),
    ]
}

/// Writes the checkpoint into `dir`, creating it if needed. Returns the
/// written paths.
pub fn save_checkpoint(probe: &TrainedProbe, dir: &Path) -> Result<[PathBuf; 3]> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = checkpoint_files(dir);
    let [meta, wl, we] = &paths;
    let mut json = serde_json::to_vec_pretty(&CheckpointMeta::of(probe)).expect("serializable");
    json.push(b'\n');
    std::fs::write(meta, json).map_err(|e| Error::io(meta, e))?;
    write_weights(probe.parameters.w_label(), wl)?;
    write_weights(probe.parameters.w_event(), we)?;
    Ok(paths)
}

fn write_weights(m: &Matrix, path: &Path) -> Result<()> {
    let bytes = format::encode_f64(m).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_weights(path: &Path, meta: &CheckpointMeta) -> Result<Matrix> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let m = format::decode_f64(&bytes).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })?;
    let declared = (meta.projection_dim, meta.input_dim);
    if m.shape() != declared {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            message: format!(
                "matrix shape {}x{} does not match declared d_p x d = {}x{}",
                m.rows(),
                m.cols(),
                declared.0,
                declared.1
            ),
        });
    }
    Ok(m)
}

pub fn load_checkpoint(dir: &Path) -> Result<TrainedProbe> {
    let [meta_path, wl, we] = checkpoint_files(dir);
    let bytes = std::fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    // Check the version before the full schema so old files get a clear
    // message.
    let version: Option<u32> = serde_json::from_slice::<serde_json::Value>(&bytes)
        .ok()
        .and_then(|v| v.get("format_version")?.as_u64())
        .map(|v| v as u32);
    if let Some(v) = version.filter(|&v| v != CHECKPOINT_FORMAT_VERSION) {
        return Err(Error::Checkpoint {
            path: meta_path,
            message: format!("checkpoint format version {v}, expected {CHECKPOINT_FORMAT_VERSION}"),
        });
    }
    let meta: CheckpointMeta = serde_json::from_slice(&bytes).map_err(|e| Error::Json {
        path: meta_path.clone(),
        message: e.to_string(),
    })?;
    let bad = |message: String| Error::Checkpoint {
        path: meta_path.clone(),
        message,
    };
    if meta.trace.len() != meta.stopped_epoch {
        return Err(bad(format!(
            "trace has {} epochs but stopped_epoch is {}",
            meta.trace.len(),
            meta.stopped_epoch
        )));
    }
    if meta.selected_epoch > meta.stopped_epoch {
        return Err(bad(format!(
            "selected_epoch {} exceeds stopped_epoch {}",
            meta.selected_epoch, meta.stopped_epoch
        )));
    }
    let w_label = read_weights(&wl, &meta)?;
    let w_event = read_weights(&we, &meta)?;
    let parameters =
        ProbeParameters::new(w_label, w_event, meta.temperature).map_err(|e| bad(e.to_string()))?;
    Ok(TrainedProbe {
        parameters,
        trace: meta.trace,
        initial_valid_loss: meta.initial_valid_loss,
        selected_epoch: meta.selected_epoch,
        stopped_epoch: meta.stopped_epoch,
        monitor_split: meta.monitor_split,
        config: meta.config,
        corpus_tag: meta.corpus_tag,
        model_tag: meta.model_tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use emoprobe_core::probe::train;
    use emoprobe_core::synth::{generate_synthetic, SynthConfig};

    fn small_probe() -> TrainedProbe {
        let cfg = SynthConfig {
            events_per_category: 20,
            dim: 6,
            ..SynthConfig::default()
        };
        let (c, e) = generate_synthetic(&cfg, 3).unwrap();
        let mut tc = TrainConfig::new(3);
        tc.max_epochs = 4;
        train(&tc, &c, &e).unwrap()
    }

    #[test]
    fn round_trip_is_exact_and_keeps_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let probe = small_probe();
        save_checkpoint(&probe, dir.path()).unwrap();
        let back = load_checkpoint(dir.path()).unwrap();
        assert_eq!(back, probe);
        assert!(back.corpus_tag.starts_with("synthetic:"));
        assert_eq!(back.model_tag, "synthetic-gaussian-seed3");
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(
            bits(back.parameters.w_label()),
            bits(probe.parameters.w_label())
        );
        assert_eq!(
            back.parameters.temperature().to_bits(),
            probe.parameters.temperature().to_bits()
        );
    }

    #[test]
    fn declared_shape_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&small_probe(), dir.path()).unwrap();
        let meta_path = dir.path().join(META_FILE);
        let mut meta: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&meta_path).unwrap()).unwrap();
        meta["projection_dim"] = 5.into();
        std::fs::write(&meta_path, serde_json::to_vec(&meta).unwrap()).unwrap();
        let err = load_checkpoint(dir.path()).unwrap_err();
        assert!(err.to_string().contains("does not match declared"), "{err}");
    }

    #[test]
    fn version_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&small_probe(), dir.path()).unwrap();
        let meta_path = dir.path().join(META_FILE);
        let text = std::fs::read_to_string(&meta_path).unwrap();
        std::fs::write(
            &meta_path,
            text.replace("\"format_version\": 1", "\"format_version\": 2"),
        )
        .unwrap();
        let err = load_checkpoint(dir.path()).unwrap_err();
        assert!(err.to_string().contains("format version 2"), "{err}");
    }

    #[test]
    fn corrupted_weights_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&small_probe(), dir.path()).unwrap();
        let w = dir.path().join(W_EVENT_FILE);
        let bytes = std::fs::read(&w).unwrap();
        std::fs::write(&w, &bytes[..bytes.len() - 3]).unwrap();
        let err = load_checkpoint(dir.path()).unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
        assert!(err.to_string().contains(W_EVENT_FILE));
    }
}
