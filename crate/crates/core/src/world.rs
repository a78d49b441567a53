//! Synthetic Bradley-Terry preference worlds.
//!
//! A world scores a feature vector with a fixed linear reward
//! `r*(f) = <true_weights, f>` and turns a pair into an oracle preference
//! probability `sigmoid((r*(f1) - r*(f2)) / T)`. Labels for any feedback
//! system are drawn from that oracle with common random numbers: the same
//! seed gives the same features and the same per-item uniform for every
//! system, so datasets under different scales differ only in how each
//! uniform is mapped to a label.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::label_from_uniform;
use crate::item::{dot, PreferenceItem};
use crate::losses::sigmoid;
use crate::rng::{RngSeed, SimRng};
use crate::scale::FeedbackSystem;

/// Temperature used by default when turning reward gaps into oracle probabilities.
pub const DEFAULT_TEMPERATURE: f64 = 20.0 / 3.0;

pub const DEFAULT_DIMENSION: usize = 16;

/// Coordinates are drawn as `shift + scale * N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSampler {
    pub shift: f64,
    pub scale: f64,
}

impl FeatureSampler {
    pub const STANDARD: Self = Self { shift: 0.0, scale: 1.0 };
    pub const DEFAULT_OOD: Self = Self { shift: 0.5, scale: 1.5 };

    pub fn sample(&self, dimension: usize, rng: &mut SimRng) -> Vec<f64> {
        (0..dimension)
            .map(|_| {
                let g: f64 = rng.sample(StandardNormal);
                self.shift + self.scale * g
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    pub dimension: usize,
    pub true_weights: Vec<f64>,
    pub temperature: f64,
    pub id_sampler: FeatureSampler,
    pub ood_sampler: FeatureSampler,
}

impl SyntheticWorld {
    /// Standard-normal true weights drawn once from `seed`.
    pub fn new(dimension: usize, temperature: f64, seed: RngSeed) -> Result<Self> {
        let mut rng = seed.rng();
        let weights = (0..dimension).map(|_| rng.sample(StandardNormal)).collect();
        Self::with_weights(weights, temperature)
    }

    pub fn with_weights(true_weights: Vec<f64>, temperature: f64) -> Result<Self> {
        if true_weights.is_empty() {
            return Err(Error::InvalidConfig("world dimension must be at least 1".into()));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!("temperature must be positive, got {temperature}")));
        }
        Ok(Self {
            dimension: true_weights.len(),
            true_weights,
            temperature,
            id_sampler: FeatureSampler::STANDARD,
            ood_sampler: FeatureSampler::DEFAULT_OOD,
        })
    }

    pub fn reward(&self, features: &[f64]) -> f64 {
        dot(&self.true_weights, features)
    }

    pub fn oracle(&self, features1: &[f64], features2: &[f64]) -> f64 {
        sigmoid((self.reward(features1) - self.reward(features2)) / self.temperature)
    }

    /// `n` unlabeled items (oracle filled in) from the given sampler.
    pub fn sample_items(&self, sampler: FeatureSampler, n: usize, rng: &mut SimRng) -> Vec<PreferenceItem> {
        (0..n)
            .map(|i| {
                let f1 = sampler.sample(self.dimension, rng);
                let f2 = sampler.sample(self.dimension, rng);
                let oracle = self.oracle(&f1, &f2);
                PreferenceItem {
                    id: format!("item-{i}"),
                    features1: f1,
                    features2: f2,
                    oracle: Some(oracle),
                    label: None,
                }
            })
            .collect()
    }

    /// Oracle-labeled held-out set, used for evaluation.
    pub fn held_out(&self, sampler: FeatureSampler, n: usize, seed: RngSeed) -> Vec<PreferenceItem> {
        let mut items = self.sample_items(sampler, n, &mut seed.rng());
        for it in &mut items {
            it.label = it.oracle;
        }
        items
    }
}

/// Label for an oracle value under a feedback system, given the item's uniform.
pub fn label_with_uniform(system: &FeedbackSystem, oracle: f64, u: f64) -> Result<f64> {
    match system {
        FeedbackSystem::Oracle => Ok(oracle),
        FeedbackSystem::Ordinal(scale) => label_from_uniform(scale, oracle, u),
    }
}

/// Per-item label uniforms for a dataset seed; shared by all feedback systems.
pub fn label_uniforms(seed: RngSeed, n: usize) -> Vec<f64> {
    let mut rng = seed.derive(1).rng();
    (0..n).map(|_| rng.random::<f64>()).collect()
}

/// `n` in-distribution items labeled under `system`. Features come from
/// `seed.derive(0)` and label uniforms from `seed.derive(1)`.
pub fn generate_dataset(
    world: &SyntheticWorld,
    n: usize,
    system: &FeedbackSystem,
    seed: RngSeed,
) -> Result<Vec<PreferenceItem>> {
    let mut items = world.sample_items(world.id_sampler, n, &mut seed.derive(0).rng());
    let uniforms = label_uniforms(seed, n);
    for (it, u) in items.iter_mut().zip(uniforms) {
        it.label = Some(label_with_uniform(system, it.oracle.unwrap_or(0.5), u)?);
    }
    Ok(items)
}
