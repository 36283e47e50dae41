use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};

use crate::belief::PriorSampler;
use crate::error::{Error, Result};

/// Independent binary features with success probabilities `means`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliBelief {
    means: Vec<f64>,
}

impl BernoulliBelief {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidBelief("no features".into()));
        }
        if let Some(bad) = means.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidBelief(format!(
                "success probability {bad} outside [0, 1]"
            )));
        }
        Ok(Self { means })
    }

    /// `d` features sharing the same success probability.
    pub fn iid(p: f64, d: usize) -> Result<Self> {
        Self::new(vec![p; d])
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Per-feature variances p(1 − p).
    pub fn variances(&self) -> Vec<f64> {
        self.means.iter().map(|p| p * (1.0 - p)).collect()
    }

    /// Folded probabilities min(p, 1 − p): the chance of the rarer value.
    pub fn folded(&self) -> Vec<f64> {
        self.means.iter().map(|&p| p.min(1.0 - p)).collect()
    }
}

impl PriorSampler for BernoulliBelief {
    fn dim(&self) -> usize {
        self.means.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.means
            .iter()
            .map(|&p| if rng.random::<f64>() < p { 1.0 } else { 0.0 })
            .collect()
    }
}
