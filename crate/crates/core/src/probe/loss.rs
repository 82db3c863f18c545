//! Supervised contrastive loss with emotion-label anchors.
//!
//! For anchor `i` with positives `P(i)` (candidates of the same category)
//! among candidates `A(i)` (all candidates in the batch):
//!
//! ```text
//! ℓ_i = -(1/|P(i)|) Σ_{p∈P(i)} log( exp(s_ip/τ) / Σ_{a∈A(i)} exp(s_ia/τ) )
//! L   = mean_i ℓ_i
//! ```
//!
//! Writing `G_ia = ∂L/∂s_ia = (softmax_i(a) - [a∈P(i)]/|P(i)|) / (τ·n)`, the
//! chain rule through the cosine gives, with `û = u/‖u‖`:
//!
//! ```text
//! ∂L/∂u_i = (g_i - (g_i·û_i) û_i) / ‖u_i‖,   g_i = Σ_a G_ia v̂_a
//! ∂L/∂v_a = (h_a - (h_a·v̂_a) v̂_a) / ‖v_a‖,   h_a = Σ_i G_ia û_i
//! ∂L/∂W_label = Σ_i ∂L/∂u_i ⊗ l_i,  ∂L/∂W_event = Σ_a ∂L/∂v_a ⊗ x_a
//! ```

use alloc::vec;
use alloc::vec::Vec;

use super::{cosine_table, ProbeError, ProbeParameters, Projected, Side};
use crate::linalg::{dot, Matrix};

/// Anchors (one per emotion category) and candidate events for one step.
///
/// Anchors without a positive candidate are dropped at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    anchor_categories: Vec<usize>,
    anchors: Matrix,
    candidate_categories: Vec<usize>,
    candidates: Matrix,
}

impl ContrastiveBatch {
    /// `anchors` rows pair with `anchor_categories`, `candidates` rows with
    /// `candidate_categories`.
    pub fn new(
        anchor_categories: Vec<usize>,
        anchors: Matrix,
        candidate_categories: Vec<usize>,
        candidates: Matrix,
    ) -> Self {
        assert_eq!(anchor_categories.len(), anchors.rows());
        assert_eq!(candidate_categories.len(), candidates.rows());
        let keep: Vec<usize> = anchor_categories
            .iter()
            .enumerate()
            .filter(|(_, c)| candidate_categories.contains(c))
            .map(|(i, _)| i)
            .collect();
        if keep.len() == anchor_categories.len() {
            return Self {
                anchor_categories,
                anchors,
                candidate_categories,
                candidates,
            };
        }
        let mut data = Vec::with_capacity(keep.len() * anchors.cols());
        for &i in &keep {
            data.extend_from_slice(anchors.row(i));
        }
        Self {
            anchor_categories: keep.iter().map(|&i| anchor_categories[i]).collect(),
            anchors: Matrix::from_vec(keep.len(), anchors.cols(), data).expect("kept rows"),
            candidate_categories,
            candidates,
        }
    }

    pub fn anchor_categories(&self) -> &[usize] {
        &self.anchor_categories
    }

    pub fn anchors(&self) -> &Matrix {
        &self.anchors
    }

    pub fn candidate_categories(&self) -> &[usize] {
        &self.candidate_categories
    }

    pub fn candidates(&self) -> &Matrix {
        &self.candidates
    }

    pub fn n_anchors(&self) -> usize {
        self.anchor_categories.len()
    }

    /// Indices of the candidates positive for anchor `i`.
    pub fn positives(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.anchor_categories[i];
        self.candidate_categories
            .iter()
            .enumerate()
            .filter(move |(_, &k)| k == c)
            .map(|(j, _)| j)
    }
}

struct Forward {
    u: Projected,
    v: Projected,
    sims: Matrix,
}

fn forward(params: &ProbeParameters, batch: &ContrastiveBatch) -> Result<Forward, ProbeError> {
    if batch.n_anchors() == 0 {
        return Err(ProbeError::EmptyBatch);
    }
    let u = params.project_normalized(Side::Label, &batch.anchors)?;
    let v = params.project_normalized(Side::Event, &batch.candidates)?;
    let sims = cosine_table(&u.unit, &v.unit);
    Ok(Forward { u, v, sims })
}

/// Per-anchor loss terms and, for each anchor, the softmax over candidates.
fn anchor_terms(batch: &ContrastiveBatch, sims: &Matrix, temperature: f64) -> (Vec<f64>, Matrix) {
    let n_c = sims.cols();
    let mut terms = Vec::with_capacity(batch.n_anchors());
    let mut softmax = Matrix::zeros(sims.rows(), n_c);
    for i in 0..batch.n_anchors() {
        let logits: Vec<f64> = sims.row(i).iter().map(|s| s / temperature).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| libm::exp(l - max)).sum();
        let lse = max + libm::log(sum);
        for (j, l) in logits.iter().enumerate() {
            softmax.set(i, j, libm::exp(l - lse));
        }
        let (mut pos_sum, mut n_pos) = (0.0, 0usize);
        for p in batch.positives(i) {
            pos_sum += logits[p];
            n_pos += 1;
        }
        terms.push(lse - pos_sum / n_pos as f64);
    }
    (terms, softmax)
}

/// The per-anchor terms `ℓ_i`; each is non-negative up to rounding.
pub fn supcon_loss_terms(
    params: &ProbeParameters,
    batch: &ContrastiveBatch,
) -> Result<Vec<f64>, ProbeError> {
    let f = forward(params, batch)?;
    Ok(anchor_terms(batch, &f.sims, params.temperature()).0)
}

pub fn supcon_loss(params: &ProbeParameters, batch: &ContrastiveBatch) -> Result<f64, ProbeError> {
    let terms = supcon_loss_terms(params, batch)?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

pub fn supcon_gradient(
    params: &ProbeParameters,
    batch: &ContrastiveBatch,
) -> Result<(Matrix, Matrix), ProbeError> {
    supcon_loss_and_gradient(params, batch).map(|(_, gl, ge)| (gl, ge))
}

/// Loss plus gradients with respect to `W_label` and `W_event`.
pub fn supcon_loss_and_gradient(
    params: &ProbeParameters,
    batch: &ContrastiveBatch,
) -> Result<(f64, Matrix, Matrix), ProbeError> {
    let f = forward(params, batch)?;
    let tau = params.temperature();
    let (terms, softmax) = anchor_terms(batch, &f.sims, tau);
    let n_a = batch.n_anchors();
    let n_c = batch.candidates.rows();
    let dp = params.projection_dim();
    let loss = terms.iter().sum::<f64>() / n_a as f64;

    // G = ∂L/∂s
    let mut g_sim = softmax;
    let scale = 1.0 / (tau * n_a as f64);
    for i in 0..n_a {
        let positives: Vec<usize> = batch.positives(i).collect();
        let inv_pos = 1.0 / positives.len() as f64;
        for &p in &positives {
            let v = g_sim.get(i, p) - inv_pos;
            g_sim.set(i, p, v);
        }
        for j in 0..n_c {
            g_sim.set(i, j, g_sim.get(i, j) * scale);
        }
    }

    let mut grad_label = Matrix::zeros(dp, params.input_dim());
    let mut grad_event = Matrix::zeros(dp, params.input_dim());
    let mut acc = vec![0.0; dp];

    for i in 0..n_a {
        acc.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..n_c {
            let g = g_sim.get(i, j);
            for (a, v) in acc.iter_mut().zip(f.v.unit.row(j)) {
                *a += g * v;
            }
        }
        let dir = f.u.unit.row(i);
        tangent_in_place(&mut acc, dir, f.u.norms[i]);
        grad_label.add_outer(1.0, &acc, batch.anchors.row(i));
    }

    for j in 0..n_c {
        acc.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n_a {
            let g = g_sim.get(i, j);
            for (a, u) in acc.iter_mut().zip(f.u.unit.row(i)) {
                *a += g * u;
            }
        }
        let dir = f.v.unit.row(j);
        tangent_in_place(&mut acc, dir, f.v.norms[j]);
        grad_event.add_outer(1.0, &acc, batch.candidates.row(j));
    }

    Ok((loss, grad_label, grad_event))
}

/// `g ← (g - (g·d) d) / n`: gradient through `x ↦ x/‖x‖` at a point with
/// direction `d` and norm `n`.
fn tangent_in_place(g: &mut [f64], dir: &[f64], n: f64) {
    let along = dot(g, dir);
    for (gi, di) in g.iter_mut().zip(dir) {
        *gi = (*gi - along * di) / n;
    }
}
