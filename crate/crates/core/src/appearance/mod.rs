//! Appearance embeddings: normalization, distances, metric-learning losses
//! and same/different identity decisions.

mod embedder;

pub use embedder::{
    calibrate_threshold, total_loss_and_grad, train_embedder, verification_pairs, EmbedderParams,
    EmbedderTrainConfig, LabeledFeatures, TrainedEmbedder, TripletSample,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm};

pub const EMBEDDING_DIM: usize = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AppearanceError {
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("need at least 2 identities with at least {min_per_identity} samples each, got {found}")]
    InsufficientIdentities { found: usize, min_per_identity: usize },
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// Unit-norm appearance vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Wraps values that are already unit norm (e.g. read back from a log).
    pub fn from_unit(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub fn l2_normalize(v: &[f64]) -> Result<Embedding, AppearanceError> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return Err(AppearanceError::ZeroVector);
    }
    Ok(Embedding(v.iter().map(|x| x / n).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    Euclidean,
    Cosine,
}

pub fn embedding_distance(a: &Embedding, b: &Embedding, metric: DistanceMetric) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    match metric {
        DistanceMetric::Euclidean => euclidean(a.values(), b.values()),
        DistanceMetric::Cosine => (1.0 - dot(a.values(), b.values())).max(0.0),
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub margin_alpha: f64,
    pub lambda: f64,
    pub num_classes: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { margin_alpha: 0.2, lambda: 0.1, num_classes: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub anchor: Embedding,
    pub positive: Embedding,
    pub negative: Embedding,
}

/// Hinge on the distance gap: pulls anchor/positive together and pushes the
/// negative at least `margin_alpha` further away.
pub fn triplet_loss_from_distances(d_ap: f64, d_an: f64, margin_alpha: f64) -> f64 {
    (margin_alpha + d_ap - d_an).max(0.0)
}

pub fn triplet_loss(t: &Triplet, cfg: &LossConfig) -> f64 {
    let d_ap = embedding_distance(&t.anchor, &t.positive, DistanceMetric::Euclidean);
    let d_an = embedding_distance(&t.anchor, &t.negative, DistanceMetric::Euclidean);
    triplet_loss_from_distances(d_ap, d_an, cfg.margin_alpha)
}

/// Cross-entropy of `logits` against the class `label`.
pub fn softmax_loss(logits: &[f64], label: usize) -> f64 {
    assert!(logits.len() >= 2 && label < logits.len());
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Triplet loss plus `lambda` times the three classification losses.
pub fn total_loss(triplet_loss: f64, softmax_losses: [f64; 3], lambda: f64) -> f64 {
    triplet_loss + lambda * softmax_losses.iter().sum::<f64>()
}

pub fn same_identity(a: &Embedding, b: &Embedding, threshold: f64) -> bool {
    embedding_distance(a, b, DistanceMetric::Euclidean) < threshold
}
