//! Unbiased ordinal-label synthesis.
//!
//! Given an oracle preference probability `o` and a scale `z_1 < ... < z_m`,
//! any label distribution whose mean equals `o` is a convex combination of
//! two-point measures `mu_{j,k}` that put mass `(z_k - o)/(z_k - z_j)` on
//! `z_j` and `(o - z_j)/(z_k - z_j)` on `z_k`. This module builds those
//! measures, samples from them and recovers the mixture weights of an
//! arbitrary unbiased measure.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::rng::RngSeed;
use crate::scale::{OrdinalScale, LEVEL_TOLERANCE};

/// Tolerance on `|mean - oracle|` accepted by [`decompose_unbiased`].
pub const UNBIASED_TOLERANCE: f64 = 1e-9;

/// Masses below this are treated as exhausted during decomposition.
const RESIDUAL_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPointSpec {
    pub lower: usize,
    pub upper: usize,
    pub oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub components: Vec<(TwoPointSpec, f64)>,
}

impl Decomposition {
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|(_, w)| w).sum()
    }

    /// Re-mixes the two-point components on `scale`.
    pub fn reconstruct(&self, scale: &OrdinalScale) -> Result<DiscreteMeasure> {
        let parts = self
            .components
            .iter()
            .map(|(spec, w)| Ok((*w, two_point_measure(scale, spec)?)))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<(f64, &DiscreteMeasure)> = parts.iter().map(|(w, m)| (*w, m)).collect();
        DiscreteMeasure::mixture(&refs)
    }
}

/// The interpolation measure `mu_{j,k}` for `spec.oracle` in `[z_j, z_k]`.
pub fn two_point_measure(scale: &OrdinalScale, spec: &TwoPointSpec) -> Result<DiscreteMeasure> {
    let levels = scale.levels();
    let (j, k, o) = (spec.lower, spec.upper, spec.oracle);
    if j >= levels.len() || k >= levels.len() {
        return Err(Error::DimensionMismatch {
            expected: levels.len(),
            got: j.max(k) + 1,
        });
    }
    let (zj, zk) = (levels[j], levels[k]);
    if j == k {
        if (o - zj).abs() > LEVEL_TOLERANCE {
            return Err(Error::DegenerateInterval { level: zj, oracle: o });
        }
        return Ok(DiscreteMeasure::dirac(scale.clone(), j));
    }
    if j > k || !(zj..=zk).contains(&o) {
        return Err(Error::IntervalViolation {
            oracle: o,
            lower: zj,
            upper: zk,
        });
    }
    let mut mass = vec![0.0; levels.len()];
    mass[j] = (zk - o) / (zk - zj);
    mass[k] = (o - zj) / (zk - zj);
    DiscreteMeasure::new(scale.clone(), mass)
}

/// The two-point measure on the adjacent pair of levels bracketing `oracle`,
/// or the Dirac measure when `oracle` is itself a level.
pub fn smallest_interval_measure(scale: &OrdinalScale, oracle: f64) -> Result<DiscreteMeasure> {
    let spec = smallest_interval(scale, oracle)?;
    two_point_measure(scale, &spec)
}

pub fn smallest_interval(scale: &OrdinalScale, oracle: f64) -> Result<TwoPointSpec> {
    let levels = scale.levels();
    if !(scale.min()..=scale.max()).contains(&oracle) {
        return Err(Error::OracleOutOfScale {
            oracle,
            min: scale.min(),
            max: scale.max(),
        });
    }
    // last level <= oracle; exists because oracle >= z_1
    let j = levels.iter().rposition(|&z| z <= oracle).unwrap_or(0);
    if levels[j] == oracle {
        return Ok(TwoPointSpec { lower: j, upper: j, oracle });
    }
    Ok(TwoPointSpec {
        lower: j,
        upper: j + 1,
        oracle,
    })
}

/// Draws one label from `measure` with a fresh stream seeded by `seed`.
pub fn sample_label(measure: &DiscreteMeasure, seed: RngSeed) -> f64 {
    measure.sample(&mut seed.rng())
}

/// Draws `n` labels from one stream. One uniform is consumed per label.
pub fn sample_labels<R: Rng + ?Sized>(measure: &DiscreteMeasure, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| measure.sample(rng)).collect()
}

/// Labels an oracle value on `scale` using the uniform draw `u`: the
/// smallest-interval measure inverted top-down (see
/// [`DiscreteMeasure::index_for_uniform`]).
pub fn label_from_uniform(scale: &OrdinalScale, oracle: f64, u: f64) -> Result<f64> {
    Ok(smallest_interval_measure(scale, oracle)?.level_for_uniform(u))
}

/// Splits an unbiased measure into two-point interpolation measures.
///
/// Repeatedly picks the support point `i` off the oracle minimizing
/// `|z_i - o| * mass_i` (lowest index on ties), pairs it with the nearest
/// support point on the other side of the oracle, and removes the largest
/// multiple of that pair's two-point measure that exhausts `i`. The
/// minimality of `i` guarantees the partner never goes negative. Mass
/// sitting exactly on the oracle becomes a Dirac component.
pub fn decompose_unbiased(measure: &DiscreteMeasure, oracle: f64) -> Result<Decomposition> {
    let mean = measure.mean();
    if (mean - oracle).abs() > UNBIASED_TOLERANCE {
        return Err(Error::BiasedMeasure { mean, oracle });
    }
    let levels = measure.scale().levels();
    let at_oracle = measure.scale().index_of(oracle);
    let mut residual = measure.mass().to_vec();
    let mut components = Vec::new();

    loop {
        let candidates: Vec<usize> = (0..levels.len())
            .filter(|&i| Some(i) != at_oracle && residual[i] > RESIDUAL_FLOOR)
            .collect();
        let Some(&first) = candidates.first() else { break };
        let score = |i: usize| (levels[i] - oracle).abs() * residual[i];
        let pick = candidates
            .iter()
            .copied()
            .fold(first, |best, i| if score(i) < score(best) { i } else { best });

        let below = levels[pick] < oracle;
        let partner = candidates
            .iter()
            .copied()
            .filter(|&k| (levels[k] < oracle) != below)
            .min_by(|&a, &b| {
                (levels[a] - oracle)
                    .abs()
                    .total_cmp(&(levels[b] - oracle).abs())
                    .then(a.cmp(&b))
            });
        let Some(partner) = partner else {
            // only rounding dust can be left on one side of the oracle
            let dust: f64 = candidates.iter().map(|&i| residual[i]).sum();
            if dust > UNBIASED_TOLERANCE {
                return Err(Error::BiasedMeasure { mean, oracle });
            }
            break;
        };

        let (lower, upper) = if below { (pick, partner) } else { (partner, pick) };
        let (zj, zk) = (levels[lower], levels[upper]);
        let pick_share = if below {
            (zk - oracle) / (zk - zj)
        } else {
            (oracle - zj) / (zk - zj)
        };
        let weight = residual[pick] / pick_share;
        residual[pick] = 0.0;
        residual[partner] = (residual[partner] - weight * (1.0 - pick_share)).max(0.0);
        components.push((TwoPointSpec { lower, upper, oracle }, weight));
    }

    if let Some(i0) = at_oracle {
        if residual[i0] > 0.0 {
            components.push((TwoPointSpec { lower: i0, upper: i0, oracle }, residual[i0]));
        }
    }
    let decomposition = Decomposition { components };
    let total = decomposition.total_weight();
    if (total - 1.0).abs() > UNBIASED_TOLERANCE {
        return Err(Error::BiasedMeasure { mean, oracle });
    }
    Ok(decomposition)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnbiasednessReport {
    pub mean: f64,
    pub stderr: f64,
    pub pass: bool,
}

/// z-test of `mean(samples) == oracle`: passes iff
/// `|mean - oracle| <= confidence_z * stderr`.
pub fn check_unbiasedness(samples: &[f64], oracle: f64, confidence_z: f64) -> Result<UnbiasednessReport> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let (mean, stderr) = mean_stderr(samples);
    Ok(UnbiasednessReport {
        mean,
        stderr,
        pass: (mean - oracle).abs() <= confidence_z * stderr,
    })
}

/// A random unbiased measure on `scale` for a uniformly drawn oracle: a
/// mixture, with random weights, of every two-point measure (and the Dirac
/// measure when the oracle sits on a level) admissible for that oracle.
pub fn random_unbiased_measure<R: Rng + ?Sized>(scale: &OrdinalScale, rng: &mut R) -> (DiscreteMeasure, f64) {
    let levels = scale.levels();
    let oracle = levels[0] + rng.random::<f64>() * (levels[levels.len() - 1] - levels[0]);
    let mut parts = Vec::new();
    for j in 0..levels.len() {
        for k in j + 1..levels.len() {
            if levels[j] <= oracle && oracle <= levels[k] {
                let spec = TwoPointSpec { lower: j, upper: k, oracle };
                parts.push(two_point_measure(scale, &spec).expect("bracketing pair"));
            }
        }
    }
    let raw: Vec<f64> = parts.iter().map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let comps: Vec<(f64, &DiscreteMeasure)> = raw.iter().map(|w| w / total).zip(&parts).collect();
    let measure = DiscreteMeasure::mixture(&comps).expect("weights sum to one");
    (measure, oracle)
}

/// Sample mean and its standard error (unbiased variance; zero for n = 1).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::{scale_preset, ScalePreset};
    use proptest::prelude::*;

    fn three() -> OrdinalScale {
        scale_preset(ScalePreset::ThreeLevel)
    }
    fn five() -> OrdinalScale {
        scale_preset(ScalePreset::FiveLevel)
    }

    #[test]
    fn worked_example_three_level() {
        let mu = two_point_measure(&three(), &TwoPointSpec { lower: 1, upper: 2, oracle: 0.8 }).unwrap();
        assert!((mu.mass_at(1) - 0.4).abs() < 1e-15);
        assert!((mu.mass_at(2) - 0.6).abs() < 1e-15);
        assert_eq!(mu.mass_at(0), 0.0);
        assert!((mu.mean() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn dirac_on_level() {
        let bin = scale_preset(ScalePreset::Binary);
        let mu = smallest_interval_measure(&bin, 0.0).unwrap();
        assert_eq!(mu.mass(), &[1.0, 0.0]);
        let mu = smallest_interval_measure(&three(), 0.5).unwrap();
        assert_eq!(mu.mass(), &[0.0, 1.0, 0.0]);
        let mu = smallest_interval_measure(&three(), 1.0).unwrap();
        assert_eq!(mu.mass(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn five_level_interpolation() {
        // 2x2 system: a + b = 1, 0.5a + 0.8b = 0.6  =>  b = 1/3, a = 2/3
        let mu = two_point_measure(&five(), &TwoPointSpec { lower: 2, upper: 3, oracle: 0.6 }).unwrap();
        assert!((mu.mass_at(2) - 2.0 / 3.0).abs() < 1e-12);
        assert!((mu.mass_at(3) - 1.0 / 3.0).abs() < 1e-12);
        assert!((mu.mean() - 0.6).abs() < 1e-12);

        let mu = smallest_interval_measure(&five(), 0.9).unwrap();
        assert!((mu.mass_at(3) - 0.5).abs() < 1e-12);
        assert!((mu.mass_at(4) - 0.5).abs() < 1e-12);
        assert!((mu.mean() - 0.9).abs() < 1e-12);

        let mu = smallest_interval_measure(&three(), 0.8).unwrap();
        assert!((mu.mass_at(1) - 0.4).abs() < 1e-15 && (mu.mass_at(2) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn interval_errors() {
        assert!(matches!(
            two_point_measure(&three(), &TwoPointSpec { lower: 0, upper: 1, oracle: 0.8 }),
            Err(Error::IntervalViolation { .. })
        ));
        assert!(matches!(
            two_point_measure(&three(), &TwoPointSpec { lower: 1, upper: 1, oracle: 0.8 }),
            Err(Error::DegenerateInterval { .. })
        ));
        let custom = crate::scale::validate_scale(&[0.2, 0.6], None).unwrap();
        assert!(matches!(
            smallest_interval_measure(&custom, 0.1),
            Err(Error::OracleOutOfScale { .. })
        ));
        assert!(smallest_interval_measure(&custom, f64::NAN).is_err());
    }

    #[test]
    fn sampling_dirac_is_constant() {
        let mu = smallest_interval_measure(&three(), 0.5).unwrap();
        for s in 0..50 {
            assert_eq!(sample_label(&mu, RngSeed(s)), 0.5);
        }
    }

    #[test]
    fn sampling_frequency_matches_mass() {
        let mu = smallest_interval_measure(&three(), 0.8).unwrap();
        let n = 100_000;
        let labels = sample_labels(&mu, n, &mut RngSeed(11).rng());
        let freq = labels.iter().filter(|&&z| z == 1.0).count() as f64 / n as f64;
        let tol = 3.0 * (0.24f64 / n as f64).sqrt();
        assert!((freq - 0.6).abs() <= tol, "freq {freq}");
        assert!(labels.iter().all(|&z| z == 0.5 || z == 1.0));
    }

    #[test]
    fn below_half_branch_probabilities() {
        // Bernoulli(0.3 / 0.5) picks 0.5, otherwise 0
        let mu = smallest_interval_measure(&three(), 0.3).unwrap();
        assert!((mu.mass_at(1) - 0.6).abs() < 1e-15);
        assert!((mu.mass_at(0) - 0.4).abs() < 1e-15);
        // enumerate the uniform on a fine grid: fraction landing on 0.5 is 0.6
        let grid = 10_000;
        let hits = (0..grid)
            .filter(|i| mu.level_for_uniform((*i as f64 + 0.5) / grid as f64) == 0.5)
            .count();
        assert_eq!(hits, 6000);
    }

    #[test]
    fn decompose_two_point_is_single_component() {
        let mu = smallest_interval_measure(&three(), 0.8).unwrap();
        let d = decompose_unbiased(&mu, 0.8).unwrap();
        assert_eq!(d.components.len(), 1);
        assert_eq!((d.components[0].0.lower, d.components[0].0.upper), (1, 2));
        assert!((d.components[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_three_point_by_hand() {
        // |z-o|*mass: 0 -> 0.08, 0.5 -> 0.06, 1 -> 0.14; pick 0.5 first:
        // weight 0.2 / 0.4 = 0.5 of mu_{0.5,1}; residual at 1: 0.7 - 0.3 = 0.4;
        // then 0 and 1 tie at 0.08, lowest index 0: weight 0.1 / 0.2 = 0.5 of mu_{0,1}.
        let mu = DiscreteMeasure::new(three(), vec![0.1, 0.2, 0.7]).unwrap();
        let d = decompose_unbiased(&mu, 0.8).unwrap();
        assert_eq!(d.components.len(), 2);
        assert_eq!((d.components[0].0.lower, d.components[0].0.upper), (1, 2));
        assert!((d.components[0].1 - 0.5).abs() < 1e-12);
        assert_eq!((d.components[1].0.lower, d.components[1].0.upper), (0, 2));
        assert!((d.components[1].1 - 0.5).abs() < 1e-12);
        let back = d.reconstruct(&three()).unwrap();
        assert!(back.max_abs_diff(&mu) < 1e-9);
    }

    #[test]
    fn decompose_rejects_biased() {
        let mu = DiscreteMeasure::new(scale_preset(ScalePreset::Binary), vec![0.5, 0.5]).unwrap();
        assert!(matches!(decompose_unbiased(&mu, 0.8), Err(Error::BiasedMeasure { .. })));
    }

    #[test]
    fn decompose_with_mass_on_oracle() {
        let mu = DiscreteMeasure::new(three(), vec![0.25, 0.5, 0.25]).unwrap();
        let d = decompose_unbiased(&mu, 0.5).unwrap();
        let back = d.reconstruct(&three()).unwrap();
        assert!(back.max_abs_diff(&mu) < 1e-12);
        assert!(d.components.iter().any(|(s, w)| s.lower == 1 && s.upper == 1 && (w - 0.5).abs() < 1e-12));
    }

    #[test]
    fn unbiasedness_checks() {
        let mu = smallest_interval_measure(&three(), 0.8).unwrap();
        let xs = sample_labels(&mu, 100_000, &mut RngSeed(5).rng());
        assert!(check_unbiasedness(&xs, 0.8, 3.0).unwrap().pass);

        let r = check_unbiasedness(&[0.5; 10], 0.5, 3.0).unwrap();
        assert!(r.pass);
        assert_eq!(r.stderr, 0.0);
        assert!(!check_unbiasedness(&[1.0; 10], 0.5, 3.0).unwrap().pass);
        assert_eq!(check_unbiasedness(&[], 0.5, 3.0), Err(Error::EmptySample));
    }

    fn random_unbiased(scale: &OrdinalScale, oracle: f64, raw: &[f64]) -> DiscreteMeasure {
        let levels = scale.levels();
        let mut parts = Vec::new();
        for j in 0..levels.len() {
            for k in j..levels.len() {
                let ok = if j == k { levels[j] == oracle } else { levels[j] <= oracle && oracle <= levels[k] };
                if ok {
                    parts.push(two_point_measure(scale, &TwoPointSpec { lower: j, upper: k, oracle }).unwrap());
                }
            }
        }
        let w: Vec<f64> = (0..parts.len()).map(|i| raw[i % raw.len()] + 1e-3).collect();
        let total: f64 = w.iter().sum();
        let comps: Vec<(f64, &DiscreteMeasure)> = w.iter().map(|x| x / total).zip(&parts).collect();
        DiscreteMeasure::mixture(&comps).unwrap()
    }

    proptest! {
        #[test]
        fn smallest_interval_is_unbiased(oracle in 0.0f64..=1.0, p in 0usize..3) {
            let s = scale_preset(ScalePreset::ALL[p]);
            let mu = smallest_interval_measure(&s, oracle).unwrap();
            prop_assert!((mu.mean() - oracle).abs() <= 1e-12);
        }

        #[test]
        fn decomposition_reconstructs(oracle in 0.0f64..=1.0, raw in proptest::collection::vec(0.0f64..1.0, 1..12)) {
            let s = five();
            let mu = random_unbiased(&s, oracle, &raw);
            let d = decompose_unbiased(&mu, oracle).unwrap();
            prop_assert!(d.components.iter().all(|(_, w)| *w >= 0.0));
            prop_assert!((d.total_weight() - 1.0).abs() <= 1e-9);
            let back = d.reconstruct(&s).unwrap();
            prop_assert!(back.max_abs_diff(&mu) <= 1e-9);
        }
    }
}
