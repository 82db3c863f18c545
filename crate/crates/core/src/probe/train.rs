//! Mini-batch training with validation-based early stopping.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::loss::{supcon_loss, supcon_loss_and_gradient, ContrastiveBatch};
use super::{gather_rows, ProbeError, ProbeParameters};
use crate::corpus::{Corpus, Split};
use crate::embedding::{AlignmentReport, EmbeddingSet};
use crate::linalg::Matrix;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_MAX_EPOCHS: usize = 500;
pub const DEFAULT_PATIENCE: usize = 10;
pub const MAX_DEFAULT_PROJECTION_DIM: usize = 256;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        })
    }
}

impl core::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(alloc::format!(
                "unknown optimizer {other:?} (expected sgd or adam)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// `None` resolves to `min(d, 256)`.
    pub projection_dim: Option<usize>,
    pub temperature: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl TrainConfig {
    /// Defaults for everything except the seed, which is always explicit.
    pub fn new(seed: u64) -> Self {
        Self {
            projection_dim: None,
            temperature: DEFAULT_TEMPERATURE,
            learning_rate: DEFAULT_LEARNING_RATE,
            batch_size: DEFAULT_BATCH_SIZE,
            max_epochs: DEFAULT_MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
            seed,
            optimizer: OptimizerKind::Sgd,
        }
    }

    pub fn resolved_projection_dim(&self, input_dim: usize) -> usize {
        self.projection_dim
            .unwrap_or_else(|| input_dim.min(MAX_DEFAULT_PROJECTION_DIM))
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field: &'static str| Err(TrainError::Config(field));
        if self.projection_dim == Some(0) {
            return bad("projection_dim");
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad("temperature");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs");
        }
        if self.patience == 0 {
            return bad("patience");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid training config: {0} out of range")]
    Config(&'static str),
    #[error("embeddings are not aligned with the corpus")]
    Alignment(AlignmentReport),
    #[error("contrastive training needs training events in at least 2 categories, found {0}")]
    TooFewCategories(usize),
    #[error("loss diverged (non-finite) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("at epoch {epoch}: {source}")]
    Numerical { epoch: usize, source: ProbeError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedProbe {
    pub parameters: ProbeParameters,
    /// One record per epoch run, epochs numbered from 1.
    pub trace: Vec<EpochRecord>,
    /// Monitored loss of the initial parameters.
    pub initial_valid_loss: f64,
    /// Epoch whose parameters were kept; 0 means the initialization.
    pub selected_epoch: usize,
    pub stopped_epoch: usize,
    /// Split the early-stopping loss was computed on. Falls back to train
    /// when the valid split has no usable events.
    pub monitor_split: Split,
    pub config: TrainConfig,
    pub corpus_tag: String,
    pub model_tag: String,
}

impl TrainedProbe {
    /// Monitored loss of the kept parameters.
    pub fn selected_valid_loss(&self) -> f64 {
        if self.selected_epoch == 0 {
            self.initial_valid_loss
        } else {
            self.trace[self.selected_epoch - 1].valid_loss
        }
    }
}

enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        step: i32,
        m: [Matrix; 2],
        v: [Matrix; 2],
    },
}

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, shape: (usize, usize)) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => {
                let z = || Matrix::zeros(shape.0, shape.1);
                Optimizer::Adam {
                    lr,
                    step: 0,
                    m: [z(), z()],
                    v: [z(), z()],
                }
            }
        }
    }

    fn step(&mut self, params: &mut ProbeParameters, grads: [&Matrix; 2]) {
        let (wl, we) = params.matrices_mut();
        let weights = [wl, we];
        match self {
            Optimizer::Sgd { lr } => {
                for (w, g) in weights.into_iter().zip(grads) {
                    for (wi, gi) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *wi -= *lr * gi;
                    }
                }
            }
            Optimizer::Adam { lr, step, m, v } => {
                *step += 1;
                let c1 = 1.0 - libm::pow(ADAM_BETA1, f64::from(*step));
                let c2 = 1.0 - libm::pow(ADAM_BETA2, f64::from(*step));
                for (k, (w, g)) in weights.into_iter().zip(grads).enumerate() {
                    let ms = m[k].as_mut_slice();
                    let vs = v[k].as_mut_slice();
                    for (i, (wi, gi)) in w.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
                        ms[i] = ADAM_BETA1 * ms[i] + (1.0 - ADAM_BETA1) * gi;
                        vs[i] = ADAM_BETA2 * vs[i] + (1.0 - ADAM_BETA2) * gi * gi;
                        let mh = ms[i] / c1;
                        let vh = vs[i] / c2;
                        *wi -= *lr * mh / (libm::sqrt(vh) + ADAM_EPS);
                    }
                }
            }
        }
    }
}

fn init_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let scale = 1.0 / libm::sqrt(cols as f64);
    let data = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("rows times cols")
}

/// Event rows and category indices for one split.
struct SplitData {
    rows: Vec<usize>,
    categories: Vec<usize>,
}

fn split_data(corpus: &Corpus, set: &EmbeddingSet, split: Split) -> SplitData {
    let mut rows = Vec::new();
    let mut categories = Vec::new();
    for e in corpus.split(split) {
        rows.push(set.events.row_of(&e.id).expect("alignment checked"));
        categories.push(corpus.category_index(&e.emotion).expect("corpus validated"));
    }
    SplitData { rows, categories }
}

pub fn train(
    config: &TrainConfig,
    corpus: &Corpus,
    embeddings: &EmbeddingSet,
) -> Result<TrainedProbe, TrainError> {
    config.validate()?;
    let report = embeddings.validate_alignment(corpus);
    if !report.passed() {
        return Err(TrainError::Alignment(report));
    }

    let train = split_data(corpus, embeddings, Split::Train);
    let mut seen: Vec<usize> = train.categories.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() < 2 {
        return Err(TrainError::TooFewCategories(seen.len()));
    }

    let n_cat = corpus.categories().len();
    let anchor_categories: Vec<usize> = (0..n_cat).collect();
    let label_rows: Vec<usize> = corpus
        .categories()
        .iter()
        .map(|c| {
            embeddings
                .labels
                .row_of(&c.name)
                .expect("alignment checked")
        })
        .collect();
    let anchors = gather_rows(embeddings.labels.matrix(), &label_rows);
    let events = embeddings.events.matrix();

    let valid = split_data(corpus, embeddings, Split::Valid);
    let valid_usable = valid
        .categories
        .iter()
        .any(|c| anchor_categories.contains(c));
    let (monitor_split, monitor) = if valid_usable {
        (Split::Valid, valid)
    } else {
        (
            Split::Train,
            SplitData {
                rows: train.rows.clone(),
                categories: train.categories.clone(),
            },
        )
    };
    let monitor_batch = ContrastiveBatch::new(
        anchor_categories.clone(),
        anchors.clone(),
        monitor.categories,
        gather_rows(events, &monitor.rows),
    );

    let d = embeddings.dim();
    let dp = config.resolved_projection_dim(d);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ProbeParameters::new(
        init_matrix(&mut rng, dp, d),
        init_matrix(&mut rng, dp, d),
        config.temperature,
    )
    .expect("initial parameters are finite");

    let monitor_loss = |p: &ProbeParameters, epoch: usize| -> Result<f64, TrainError> {
        let l = supcon_loss(p, &monitor_batch)
            .map_err(|source| TrainError::Numerical { epoch, source })?;
        if l.is_finite() {
            Ok(l)
        } else {
            Err(TrainError::Diverged { epoch })
        }
    };

    let initial_valid_loss = monitor_loss(&params, 0)?;
    let mut best = (0usize, params.clone(), initial_valid_loss);
    let mut since_best = 0usize;
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, (dp, d));
    let mut trace = Vec::new();
    let mut order: Vec<usize> = (0..train.rows.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let rows: Vec<usize> = chunk.iter().map(|&i| train.rows[i]).collect();
            let cats: Vec<usize> = chunk.iter().map(|&i| train.categories[i]).collect();
            let batch = ContrastiveBatch::new(
                anchor_categories.clone(),
                anchors.clone(),
                cats,
                gather_rows(events, &rows),
            );
            let (loss, gl, ge) = supcon_loss_and_gradient(&params, &batch)
                .map_err(|source| TrainError::Numerical { epoch, source })?;
            if !(loss.is_finite() && gl.is_finite() && ge.is_finite()) {
                return Err(TrainError::Diverged { epoch });
            }
            optimizer.step(&mut params, [&gl, &ge]);
            loss_sum += loss;
            n_batches += 1;
        }
        if !(params.w_label().is_finite() && params.w_event().is_finite()) {
            return Err(TrainError::Diverged { epoch });
        }
        let valid_loss = monitor_loss(&params, epoch)?;
        trace.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n_batches as f64,
            valid_loss,
        });
        if valid_loss < best.2 {
            best = (epoch, params.clone(), valid_loss);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }

    Ok(TrainedProbe {
        parameters: best.1,
        stopped_epoch: trace.len(),
        trace,
        initial_valid_loss,
        selected_epoch: best.0,
        monitor_split,
        config: TrainConfig {
            projection_dim: Some(dp),
            ..config.clone()
        },
        corpus_tag: corpus.source_tag().into(),
        model_tag: embeddings.model_tag.clone(),
    })
}
