//! Probability measures supported on the levels of an [`OrdinalScale`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::OrdinalScale;

/// Tolerance on the total mass of a measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    scale: OrdinalScale,
    mass: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(scale: OrdinalScale, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != scale.len() {
            return Err(Error::DimensionMismatch {
                expected: scale.len(),
                got: mass.len(),
            });
        }
        if let Some(bad) = mass.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::InvalidMeasure(format!("negative or non-finite mass {bad}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("masses sum to {total}")));
        }
        Ok(Self { scale, mass })
    }

    /// Skips validation; callers guarantee the masses form a measure up to
    /// accumulated rounding.
    pub(crate) fn from_raw(scale: OrdinalScale, mass: Vec<f64>) -> Self {
        Self { scale, mass }
    }

    /// Point mass at level `index`.
    pub fn dirac(scale: OrdinalScale, index: usize) -> Self {
        let mut mass = vec![0.0; scale.len()];
        mass[index] = 1.0;
        Self { scale, mass }
    }

    /// Convex combination `sum_i w_i * mu_i` of measures on a common scale.
    /// Weights must be nonnegative and sum to one within 1e-9; the result
    /// is not renormalized.
    pub fn mixture(components: &[(f64, &DiscreteMeasure)]) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidMeasure("empty mixture".into()))?;
        let scale = first.1.scale.clone();
        let mut mass = vec![0.0; scale.len()];
        for (w, mu) in components {
            if mu.scale.levels() != scale.levels() {
                return Err(Error::InvalidMeasure("mixture components on different scales".into()));
            }
            if *w < 0.0 || !w.is_finite() {
                return Err(Error::InvalidMeasure(format!("mixture weight {w}")));
            }
            for (acc, m) in mass.iter_mut().zip(&mu.mass) {
                *acc += w * m;
            }
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMeasure(format!("mixture weights sum to {total}")));
        }
        Ok(Self { scale, mass })
    }

    pub fn scale(&self) -> &OrdinalScale {
        &self.scale
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mass_at(&self, index: usize) -> f64 {
        self.mass[index]
    }

    pub fn mean(&self) -> f64 {
        self.expect(|z| z)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|z| (z - m) * (z - m))
    }

    /// Exact expectation of `f(Z)` by summation over the support.
    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.scale
            .levels()
            .iter()
            .zip(&self.mass)
            .filter(|(_, &m)| m > 0.0)
            .map(|(&z, &m)| m * f(z))
            .sum()
    }

    pub fn support(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.scale
            .levels()
            .iter()
            .zip(&self.mass)
            .enumerate()
            .filter(|(_, (_, &m))| m > 0.0)
            .map(|(i, (&z, &m))| (i, z, m))
    }

    /// Index of the level selected by the uniform draw `u` in `[0, 1)`.
    ///
    /// Levels are scanned from the top down, so for a two-point measure the
    /// upper level is chosen exactly when `u < mass(upper)`. That is the
    /// usual `Bernoulli(p)` convention with `p` the upper mass.
    pub fn index_for_uniform(&self, u: f64) -> usize {
        let mut cum = 0.0;
        for i in (0..self.mass.len()).rev() {
            cum += self.mass[i];
            if u < cum {
                return i;
            }
        }
        // rounding left u above the accumulated mass; use the lowest support level
        self.mass.iter().position(|&m| m > 0.0).unwrap_or(0)
    }

    pub fn level_for_uniform(&self, u: f64) -> f64 {
        self.scale.levels()[self.index_for_uniform(u)]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.level_for_uniform(u)
    }

    /// Largest per-level absolute difference between two measures on the same scale.
    pub fn max_abs_diff(&self, other: &DiscreteMeasure) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
