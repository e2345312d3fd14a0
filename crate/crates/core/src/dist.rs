//! Numerically stable primitives over logit and probability vectors.
//!
//! Everything here is a pure function. Entropy is measured in bits
//! (base-2 logarithm) because the truncation thresholds are calibrated
//! against that unit.

use serde::{Deserialize, Serialize};

use crate::error::DistError;

/// Tolerance on the total mass of a [`ProbVector`].
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Lower clamp applied by [`h_ns`].
pub const HNS_FLOOR: f64 = 1e-6;

/// Dense next-token scores over the vocabulary.
///
/// Entries are finite or `f64::NEG_INFINITY` (the mask sentinel). At least
/// one entry is finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct LogitVector(Vec<f64>);

impl LogitVector {
    pub fn new(scores: Vec<f64>) -> Result<Self, DistError> {
        if scores.is_empty() {
            return Err(DistError::Empty);
        }
        let mut any_finite = false;
        for (index, &value) in scores.iter().enumerate() {
            if value.is_finite() {
                any_finite = true;
            } else if value != f64::NEG_INFINITY {
                return Err(DistError::InvalidLogit { index, value });
            }
        }
        if !any_finite {
            return Err(DistError::AllMasked);
        }
        Ok(Self(scores))
    }

    pub fn vocab_size(&self) -> usize {
        self.0.len()
    }

    pub fn scores(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_fully_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Largest finite score.
    pub fn max_finite(&self) -> f64 {
        self.0
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The `k` highest finite entries as `(index, score)`, highest first.
    /// Ties keep the lower index first.
    pub fn top_k(&self, k: usize) -> Vec<(usize, f64)> {
        let mut ranked: Vec<(usize, f64)> = self
            .0
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}

impl TryFrom<Vec<f64>> for LogitVector {
    type Error = DistError;

    fn try_from(scores: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(scores)
    }
}

impl<'de> Deserialize<'de> for LogitVector {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let scores = Vec::<f64>::deserialize(deserializer)?;
        Self::new(scores).map_err(serde::de::Error::custom)
    }
}

/// A normalized distribution over the vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self, DistError> {
        if probs.is_empty() {
            return Err(DistError::Empty);
        }
        if let Some((index, &value)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(DistError::InvalidProbability { index, value });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(DistError::NotNormalized(total));
        }
        Ok(Self(probs))
    }

    /// Uniform distribution over `n` entries.
    pub fn uniform(n: usize) -> Result<Self, DistError> {
        if n == 0 {
            return Err(DistError::Empty);
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_prob(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }
}

/// Shannon entropy in bits, bounded by `log2(|V|)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntropyBits(f64);

impl EntropyBits {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Max-subtracted softmax. Masked entries map to exactly zero.
pub fn softmax(logits: &LogitVector) -> ProbVector {
    let max = logits.max_finite();
    let mut probs: Vec<f64> = logits
        .scores()
        .iter()
        .map(|&l| if l.is_finite() { (l - max).exp() } else { 0.0 })
        .collect();
    // the max entry contributes exp(0) = 1, so the sum is >= 1
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    ProbVector(probs)
}

/// `-sum p_i log2 p_i`, skipping zero-mass entries.
pub fn entropy_bits(p: &ProbVector) -> EntropyBits {
    let h: f64 = p
        .probs()
        .iter()
        .filter(|&&pi| pi > 0.0)
        .map(|&pi| -pi * pi.log2())
        .sum();
    // rounding can push a degenerate distribution a hair below zero
    let upper = (p.len() as f64).log2();
    EntropyBits(h.clamp(0.0, upper))
}

/// Logistic function, evaluated without overflow for either sign.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse-entropy threshold `sigmoid(gamma * H(p))` with `gamma < 0`.
///
/// The result lies in `(0, 0.5]` and equals `0.5` exactly when the
/// distribution is degenerate.
pub fn h_decay(p: &ProbVector, gamma: f64) -> Result<f64, DistError> {
    if !(gamma.is_finite() && gamma < 0.0) {
        return Err(DistError::InvalidGamma(gamma));
    }
    Ok(h_decay_from_entropy(entropy_bits(p), gamma))
}

pub(crate) fn h_decay_from_entropy(h: EntropyBits, gamma: f64) -> f64 {
    // keep the open lower bound when gamma * H underflows exp()
    sigmoid(gamma * h.value()).max(f64::MIN_POSITIVE)
}

/// Normalized scaled entropy `(H(p) / log2|V|)^(1/gamma)`, clamped to
/// `[1e-6, 1]`.
///
/// This is the direct-proportional comparator for [`h_decay`]. With a
/// negative `gamma` the raw value is never below one, so the clamp pins it
/// to `1.0`.
pub fn h_ns(p: &ProbVector, gamma: f64) -> Result<f64, DistError> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(DistError::InvalidGamma(gamma));
    }
    Ok(h_ns_from_entropy(entropy_bits(p), p.len(), gamma))
}

pub(crate) fn h_ns_from_entropy(h: EntropyBits, vocab_size: usize, gamma: f64) -> f64 {
    if vocab_size < 2 {
        return 1.0;
    }
    let normalized = h.value() / (vocab_size as f64).log2();
    let raw = normalized.powf(1.0 / gamma);
    if raw.is_nan() {
        return 1.0;
    }
    raw.clamp(HNS_FLOOR, 1.0)
}

/// Index of the largest finite score; ties resolve to the lowest index.
pub fn argmax(logits: &LogitVector) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, &score) in logits.scores().iter().enumerate() {
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

/// [`argmax`] over a raw slice, for callers that have not validated yet.
pub fn try_argmax(scores: &[f64]) -> Result<usize, DistError> {
    LogitVector::new(scores.to_vec()).map(|l| argmax(&l))
}
