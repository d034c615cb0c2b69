//! Appearance embeddings and their exponential moving average.

use crate::error::{Result, TrackError};

/// Re-identification feature vector. Stored unnormalized; the cosine distance
/// divides by the norms.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(TrackError::InvalidEmbedding("empty vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(TrackError::InvalidEmbedding("non-finite entry".into()));
        }
        Ok(Embedding(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmaConfig {
    /// Momentum kept from the previous average.
    pub alpha: f64,
}

impl Default for EmaConfig {
    fn default() -> Self {
        EmaConfig { alpha: 0.9 }
    }
}

impl EmaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(TrackError::Config(format!(
                "ema alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// The first observation seeds the average.
pub fn init_embedding(f: &Embedding) -> Embedding {
    f.clone()
}

/// `alpha * prev + (1 - alpha) * new`, elementwise.
pub fn ema_update(prev: &Embedding, new: &Embedding, cfg: EmaConfig) -> Result<Embedding> {
    if prev.dim() != new.dim() {
        return Err(TrackError::DimensionMismatch {
            expected: prev.dim(),
            found: new.dim(),
        });
    }
    let a = cfg.alpha;
    Ok(Embedding(
        prev.0
            .iter()
            .zip(&new.0)
            .map(|(e, f)| a * e + (1.0 - a) * f)
            .collect(),
    ))
}
