//! Reference implementations used only by tests. Each one is written the
//! slow, obvious way and shares no code path with the library routine it
//! checks (the finite-difference gradient deliberately reuses the library
//! loss: it checks the analytic gradient, not the loss).

#![allow(dead_code)]

use emoprobe_core::linalg::Matrix;
use emoprobe_core::probe::{ContrastiveBatch, ProbeParameters};
use emoprobe_core::retrieval::{RankedEntry, RankedList};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_params(rng: &mut ChaCha8Rng, dp: usize, d: usize, tau: f64) -> ProbeParameters {
    ProbeParameters::new(random_matrix(rng, dp, d), random_matrix(rng, dp, d), tau).unwrap()
}

/// A batch with every anchor category represented among the candidates.
pub fn random_batch(
    rng: &mut ChaCha8Rng,
    n_anchors: usize,
    n_candidates: usize,
    d: usize,
) -> ContrastiveBatch {
    assert!(n_candidates >= n_anchors);
    let mut cats: Vec<usize> = (0..n_candidates).map(|i| i % n_anchors).collect();
    for i in (1..cats.len()).rev() {
        cats.swap(i, rng.random_range(0..=i));
    }
    ContrastiveBatch::new(
        (0..n_anchors).collect(),
        random_matrix(rng, n_anchors, d),
        cats,
        random_matrix(rng, n_candidates, d),
    )
}

fn mat_vec(w: &Matrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.rows()];
    for (r, o) in out.iter_mut().enumerate() {
        for (c, xc) in x.iter().enumerate() {
            *o += w.get(r, c) * xc;
        }
    }
    out
}

/// Cosine of `W_label l` and `W_event x`, by hand.
pub fn naive_similarity(params: &ProbeParameters, l: &[f64], x: &[f64]) -> f64 {
    let u = mat_vec(params.w_label(), l);
    let v = mat_vec(params.w_event(), x);
    let mut uv = 0.0;
    let mut uu = 0.0;
    let mut vv = 0.0;
    for i in 0..u.len() {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    uv / (uu.sqrt() * vv.sqrt())
}

pub fn naive_similarity_matrix(
    params: &ProbeParameters,
    labels: &Matrix,
    events: &Matrix,
) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..labels.rows() {
        let mut row = Vec::new();
        for j in 0..events.rows() {
            row.push(naive_similarity(params, labels.row(i), events.row(j)));
        }
        out.push(row);
    }
    out
}

/// The loss straight from its definition: no log-sum-exp shift.
pub fn naive_loss(params: &ProbeParameters, batch: &ContrastiveBatch) -> f64 {
    let tau = params.temperature();
    let mut total = 0.0;
    let mut anchors = 0;
    for (i, &cat) in batch.anchor_categories().iter().enumerate() {
        let sims: Vec<f64> = (0..batch.candidates().rows())
            .map(|j| naive_similarity(params, batch.anchors().row(i), batch.candidates().row(j)))
            .collect();
        let denom: f64 = sims.iter().map(|s| (s / tau).exp()).sum();
        let mut term = 0.0;
        let mut n_pos = 0;
        for (j, &c) in batch.candidate_categories().iter().enumerate() {
            if c == cat {
                term += ((sims[j] / tau).exp() / denom).ln();
                n_pos += 1;
            }
        }
        if n_pos > 0 {
            total += -term / n_pos as f64;
            anchors += 1;
        }
    }
    total / anchors as f64
}

/// Central finite differences of `loss` with respect to every entry of both
/// projection matrices.
pub fn finite_difference_gradient(
    params: &ProbeParameters,
    loss: impl Fn(&ProbeParameters) -> f64,
) -> (Matrix, Matrix) {
    let (dp, d) = params.w_label().shape();
    let mut grads = [Matrix::zeros(dp, d), Matrix::zeros(dp, d)];
    for (which, grad) in grads.iter_mut().enumerate() {
        for idx in 0..dp * d {
            let eval = |delta: f64| {
                let mut wl = params.w_label().clone();
                let mut we = params.w_event().clone();
                let target = if which == 0 { &mut wl } else { &mut we };
                target.as_mut_slice()[idx] += delta;
                loss(&ProbeParameters::new(wl, we, params.temperature()).unwrap())
            };
            grad.as_mut_slice()[idx] = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
        }
    }
    let [gl, ge] = grads;
    (gl, ge)
}

/// Relative error with a small absolute floor in the denominator so that
/// entries that are zero in both routes compare equal.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn max_relative_error(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| relative_error(*x, *y))
        .fold(0.0, f64::max)
}

/// Brute-force counts `(n_cr, n_ar)` for precision.
pub fn brute_precision(list: &RankedList, k: usize) -> (u64, u64) {
    let mut n_cr = 0;
    let mut n_ar = 0;
    for (rank, e) in list.entries.iter().enumerate() {
        if rank >= k {
            break;
        }
        n_ar += 1;
        if e.emotion == list.query {
            n_cr += 1;
        }
    }
    (n_cr, n_ar)
}

/// Brute-force `(n_ur, n_cr)` with quadratic de-duplication.
pub fn brute_diversity(list: &RankedList, k: usize) -> (u64, u64) {
    let mut seen: Vec<&str> = Vec::new();
    let mut n_cr = 0;
    for e in list.entries.iter().take(k) {
        if e.emotion != list.query {
            continue;
        }
        n_cr += 1;
        if !seen.iter().any(|s| *s == e.text) {
            seen.push(&e.text);
        }
    }
    (seen.len() as u64, n_cr)
}

/// Brute-force `(matching flag count, n_cr)`.
pub fn brute_flag_rate(list: &RankedList, k: usize, explicit: bool) -> (u64, u64) {
    let correct: Vec<&RankedEntry> = list
        .entries
        .iter()
        .take(k)
        .filter(|e| e.emotion == list.query)
        .collect();
    let hits = correct.iter().filter(|e| e.explicit == explicit).count();
    (hits as u64, correct.len() as u64)
}

/// A random ranked list with repeated texts (including case and whitespace
/// variants that normalize together) and lists where the query never appears.
pub fn random_ranked_list(rng: &mut ChaCha8Rng) -> RankedList {
    let emotions = ["joy", "sad", "angry"];
    let texts = [
        "feel lonely",
        "successful career",
        "he lost his temper",
        "glad someone helped",
        "a",
        "b",
    ];
    let query = emotions[rng.random_range(0..3)];
    let len = rng.random_range(0..60);
    let query_absent = rng.random_bool(0.1);
    let entries = (0..len)
        .map(|i| {
            let mut emotion = emotions[rng.random_range(0..3)];
            if query_absent && emotion == query {
                emotion = if query == "joy" { "sad" } else { "joy" };
            }
            let mut text = texts[rng.random_range(0..texts.len())].to_string();
            if rng.random_bool(0.2) {
                text = format!("  {}  ", text.to_uppercase().replace(' ', "   "));
            }
            RankedEntry {
                event_id: format!("e{i:04}"),
                score: 1.0 - i as f64 / 64.0,
                emotion: emotion.into(),
                explicit: rng.random_bool(0.5),
                text: emoprobe_core::metrics::normalize_text(&text),
            }
        })
        .collect();
    RankedList {
        query: query.into(),
        pool_tag: "test".into(),
        entries,
    }
}
