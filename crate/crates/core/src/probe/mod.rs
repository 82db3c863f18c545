//! The supervised contrastive probe.
//!
//! Two linear maps project frozen embeddings into a shared space: `w_label`
//! for emotion-label embeddings and `w_event` for event embeddings. The score
//! of a (label, event) pair is the cosine of the two projections,
//!
//! ```text
//! sim(l, x) = <W_label l, W_event x> / (‖W_label l‖ ‖W_event x‖)
//! ```
//!
//! so it is invariant to positive rescaling of either map.

mod loss;
mod train;

pub use loss::{
    supcon_gradient, supcon_loss, supcon_loss_and_gradient, supcon_loss_terms, ContrastiveBatch,
};
pub use train::{
    train, EpochRecord, OptimizerKind, TrainConfig, TrainError, TrainedProbe, DEFAULT_BATCH_SIZE,
    DEFAULT_LEARNING_RATE, DEFAULT_MAX_EPOCHS, DEFAULT_PATIENCE, DEFAULT_TEMPERATURE,
    MAX_DEFAULT_PROJECTION_DIM,
};

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::linalg::{dot, norm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Label,
    Event,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Label => "label",
            Side::Event => "event",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProbeError {
    #[error("{side} projection collapsed to zero norm{}", fmt_row(*.row))]
    DegenerateProjection { side: Side, row: Option<usize> },
    #[error("{side} input has dimension {found}, probe expects {expected}")]
    DimMismatch {
        side: Side,
        expected: usize,
        found: usize,
    },
    #[error("projection matrices have shapes {label:?} and {event:?}; they must match")]
    ShapeMismatch {
        label: (usize, usize),
        event: (usize, usize),
    },
    #[error("temperature must be finite and > 0, got {0}")]
    Temperature(f64),
    #[error("projection matrices contain non-finite entries")]
    NonFinite,
    #[error("batch has no anchor with a positive candidate")]
    EmptyBatch,
}

fn fmt_row(row: Option<usize>) -> alloc::string::String {
    match row {
        Some(r) => alloc::format!(" at row {r}"),
        None => alloc::string::String::new(),
    }
}

/// `W_label`, `W_event` (both `d_p × d`) and the loss temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeParameters {
    w_label: Matrix,
    w_event: Matrix,
    temperature: f64,
}

impl ProbeParameters {
    pub fn new(w_label: Matrix, w_event: Matrix, temperature: f64) -> Result<Self, ProbeError> {
        if w_label.shape() != w_event.shape() {
            return Err(ProbeError::ShapeMismatch {
                label: w_label.shape(),
                event: w_event.shape(),
            });
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(ProbeError::Temperature(temperature));
        }
        if !(w_label.is_finite() && w_event.is_finite()) {
            return Err(ProbeError::NonFinite);
        }
        Ok(Self {
            w_label,
            w_event,
            temperature,
        })
    }

    pub fn identity(dim: usize, temperature: f64) -> Self {
        Self::new(Matrix::identity(dim), Matrix::identity(dim), temperature)
            .expect("identity parameters are valid")
    }

    pub fn w_label(&self) -> &Matrix {
        &self.w_label
    }

    pub fn w_event(&self) -> &Matrix {
        &self.w_event
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// Input dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.w_label.cols()
    }

    /// Projection dimension `d_p`.
    pub fn projection_dim(&self) -> usize {
        self.w_label.rows()
    }

    /// Same temperature, both maps multiplied by positive scalars.
    pub fn rescaled(&self, label_scale: f64, event_scale: f64) -> Self {
        Self {
            w_label: self.w_label.scaled(label_scale),
            w_event: self.w_event.scaled(event_scale),
            temperature: self.temperature,
        }
    }

    pub(crate) fn matrices_mut(&mut self) -> (&mut Matrix, &mut Matrix) {
        (&mut self.w_label, &mut self.w_event)
    }

    fn check_dim(&self, side: Side, found: usize) -> Result<(), ProbeError> {
        if found != self.input_dim() {
            return Err(ProbeError::DimMismatch {
                side,
                expected: self.input_dim(),
                found,
            });
        }
        Ok(())
    }

    /// Projects every row of `inputs` with the map for `side` and normalizes.
    pub fn project_normalized(&self, side: Side, inputs: &Matrix) -> Result<Projected, ProbeError> {
        self.check_dim(side, inputs.cols())?;
        let w = match side {
            Side::Label => &self.w_label,
            Side::Event => &self.w_event,
        };
        let dp = self.projection_dim();
        let mut unit = Matrix::zeros(inputs.rows(), dp);
        let mut norms = Vec::with_capacity(inputs.rows());
        let mut buf = vec![0.0; dp];
        for r in 0..inputs.rows() {
            w.mul_vec_into(inputs.row(r), &mut buf);
            let n = norm(&buf);
            if !(n > 0.0 && n.is_finite()) {
                return Err(ProbeError::DegenerateProjection { side, row: Some(r) });
            }
            for (j, v) in buf.iter().enumerate() {
                unit.set(r, j, v / n);
            }
            norms.push(n);
        }
        Ok(Projected { unit, norms })
    }
}

/// Unit-normalized projections and the norms they were divided by.
#[derive(Debug, Clone)]
pub struct Projected {
    pub unit: Matrix,
    pub norms: Vec<f64>,
}

/// Cosine of the projected label and event vectors.
pub fn similarity(
    params: &ProbeParameters,
    label_vec: &[f64],
    event_vec: &[f64],
) -> Result<f64, ProbeError> {
    params.check_dim(Side::Label, label_vec.len())?;
    params.check_dim(Side::Event, event_vec.len())?;
    let dp = params.projection_dim();
    let mut u = vec![0.0; dp];
    let mut v = vec![0.0; dp];
    params.w_label.mul_vec_into(label_vec, &mut u);
    params.w_event.mul_vec_into(event_vec, &mut v);
    let (nu, nv) = (norm(&u), norm(&v));
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(ProbeError::DegenerateProjection {
            side: Side::Label,
            row: None,
        });
    }
    if !(nv > 0.0 && nv.is_finite()) {
        return Err(ProbeError::DegenerateProjection {
            side: Side::Event,
            row: None,
        });
    }
    Ok(dot(&u, &v) / (nu * nv))
}

/// Pairwise scores, `labels.rows() × events.rows()`. A collapsed projection
/// reports the offending row on its side.
pub fn similarity_matrix(
    params: &ProbeParameters,
    labels: &Matrix,
    events: &Matrix,
) -> Result<Matrix, ProbeError> {
    let u = params.project_normalized(Side::Label, labels)?;
    let v = params.project_normalized(Side::Event, events)?;
    Ok(cosine_table(&u.unit, &v.unit))
}

pub(crate) fn cosine_table(u: &Matrix, v: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(u.rows(), v.rows());
    for i in 0..u.rows() {
        for j in 0..v.rows() {
            out.set(i, j, dot(u.row(i), v.row(j)));
        }
    }
    out
}

/// Widens selected rows of a float32 table into an `f64` matrix.
pub fn gather_rows(source: &EmbeddingMatrix, rows: &[usize]) -> Matrix {
    let dim = source.dim();
    let mut data = Vec::with_capacity(rows.len() * dim);
    for &r in rows {
        data.extend(source.row(r).iter().map(|&v| f64::from(v)));
    }
    Matrix::from_vec(rows.len(), dim, data).expect("row count times dim")
}
