//! Synthetic corpora with controllable cluster structure.
//!
//! Category `c` has mean `μ_c = o + (separation / √2) · q_c`, where `o` is a
//! shared offset drawn from `N(0, I)` and the `q_c` are orthonormal, so every
//! pair of means sits exactly `separation` apart (when `n_categories ≤ dim`;
//! otherwise the `q_c` are independent random unit vectors and the distance
//! is only approximate). Events are `μ_c + N(0, noise_std² I)`. Label
//! embeddings sit at `μ_c`. The shared offset keeps label vectors away from
//! the origin even when `separation = 0`.
//!
//! Randomness comes from ChaCha8 seeded with the caller's `u64`, so output is
//! identical across runs and platforms.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, EmotionCategory, EmotionalEvent, Split};
use crate::embedding::{EmbeddingMatrix, EmbeddingSet};

/// Names used for the first categories; later ones are `emotion<k>`.
pub const CATEGORY_NAMES: [&str; 3] = ["joy", "sad", "angry"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid synthetic config: {field} {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

fn config_error(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_categories: usize,
    pub events_per_category: usize,
    pub dim: usize,
    pub cluster_separation: f64,
    pub noise_std: f64,
    pub duplicate_fraction: f64,
    pub explicit_fraction: f64,
    /// Train, valid, test.
    pub split_ratios: [f64; 3],
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_categories: 3,
            events_per_category: 100,
            dim: 16,
            cluster_separation: 10.0,
            noise_std: 1.0,
            duplicate_fraction: 0.0,
            explicit_fraction: 0.4,
            split_ratios: [0.6, 0.2, 0.2],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_categories < 2 {
            return Err(config_error("n_categories", "must be at least 2"));
        }
        if self.events_per_category == 0 {
            return Err(config_error("events_per_category", "must be at least 1"));
        }
        if self.dim < 2 {
            return Err(config_error("dim", "must be at least 2"));
        }
        if !(self.cluster_separation.is_finite() && self.cluster_separation >= 0.0) {
            return Err(config_error(
                "cluster_separation",
                "must be finite and >= 0",
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(config_error("noise_std", "must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.duplicate_fraction) {
            return Err(config_error("duplicate_fraction", "must be in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.explicit_fraction) {
            return Err(config_error("explicit_fraction", "must be in [0, 1]"));
        }
        if self
            .split_ratios
            .iter()
            .any(|r| !(r.is_finite() && *r >= 0.0))
        {
            return Err(config_error(
                "split_ratios",
                "entries must be finite and >= 0",
            ));
        }
        let sum: f64 = self.split_ratios.iter().sum();
        if libm::fabs(sum - 1.0) > 1e-9 {
            return Err(config_error(
                "split_ratios",
                format!("must sum to 1 (got {sum})"),
            ));
        }
        Ok(())
    }

    /// Duplicated events per category.
    pub fn duplicates_per_category(&self) -> usize {
        let n = self.events_per_category;
        let d = libm::round(self.duplicate_fraction * n as f64) as usize;
        d.min(n.saturating_sub(1))
    }

    fn split_counts(&self) -> [usize; 3] {
        let n = self.events_per_category;
        let train = (libm::round(self.split_ratios[0] * n as f64) as usize).min(n);
        let valid = (libm::round(self.split_ratios[1] * n as f64) as usize).min(n - train);
        [train, valid, n - train - valid]
    }
}

pub fn category_name(index: usize) -> String {
    CATEGORY_NAMES
        .get(index)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("emotion{index}"))
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn unit_directions(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    while out.len() < n {
        let mut v = gaussian(rng, dim);
        if n <= dim {
            // Gram-Schmidt against the directions already chosen.
            for q in &out {
                let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
        if norm < 1e-6 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        out.push(v);
    }
    out
}

/// Cluster means, one per category, as described in the module docs.
pub fn cluster_means(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let offset = gaussian(rng, config.dim);
    let radius = config.cluster_separation / core::f64::consts::SQRT_2;
    unit_directions(rng, config.n_categories, config.dim)
        .into_iter()
        .map(|q| offset.iter().zip(&q).map(|(o, d)| o + radius * d).collect())
        .collect()
}

pub fn generate_synthetic(
    config: &SynthConfig,
    seed: u64,
) -> Result<(Corpus, EmbeddingSet), ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = cluster_means(config, &mut rng);
    let n = config.events_per_category;
    let n_dup = config.duplicates_per_category();
    let n_unique = n - n_dup;
    let [n_train, n_valid, _] = config.split_counts();

    let categories: Vec<EmotionCategory> = (0..config.n_categories)
        .map(|c| EmotionCategory::new(category_name(c)))
        .collect();
    let mut events = Vec::with_capacity(n * config.n_categories);
    let mut values: Vec<f32> = Vec::with_capacity(n * config.n_categories * config.dim);

    for (c, mean) in means.iter().enumerate() {
        let name = &categories[c].name;
        let mut texts: Vec<(String, bool, Vec<f32>)> = Vec::with_capacity(n);
        for k in 0..n_unique {
            let noise = gaussian(&mut rng, config.dim);
            let row: Vec<f32> = mean
                .iter()
                .zip(&noise)
                .map(|(m, z)| (m + config.noise_std * z) as f32)
                .collect();
            let explicit = rng.random::<f64>() < config.explicit_fraction;
            texts.push((format!("{name} event {k:04}"), explicit, row));
        }
        for _ in 0..n_dup {
            let src = rng.random_range(0..n_unique);
            let copy = texts[src].clone();
            texts.push(copy);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut splits = vec![Split::Test; n];
        for (rank, &i) in order.iter().enumerate() {
            splits[i] = if rank < n_train {
                Split::Train
            } else if rank < n_train + n_valid {
                Split::Valid
            } else {
                Split::Test
            };
        }
        for ((text, explicit, row), split) in texts.into_iter().zip(splits) {
            let id = format!("ev{:06}", events.len());
            values.extend_from_slice(&row);
            events.push(EmotionalEvent {
                id,
                text,
                emotion: name.clone(),
                explicit,
                split,
            });
        }
    }

    let event_ids: Vec<String> = events.iter().map(|e| e.id.clone()).collect();
    let label_values: Vec<f32> = means.iter().flatten().map(|&v| v as f32).collect();
    let source_tag = format!(
        "synthetic:c{}:n{}:d{}:sep{}:dup{}:seed{}",
        config.n_categories,
        n,
        config.dim,
        config.cluster_separation,
        config.duplicate_fraction,
        seed
    );
    let corpus = Corpus::new(categories.clone(), events, source_tag)
        .expect("generated corpus is valid by construction");
    let set = EmbeddingSet::new(
        event_ids,
        EmbeddingMatrix::new(corpus.events().len(), config.dim, values)
            .expect("generated values are finite"),
        categories.iter().map(|c| c.name.clone()).collect(),
        EmbeddingMatrix::new(config.n_categories, config.dim, label_values)
            .expect("means are finite"),
        format!("synthetic-gaussian-seed{seed}"),
    )
    .expect("generated manifests are unique");
    Ok((corpus, set))
}
