//! Hierarchical-expectation couplings between feedback systems.
//!
//! A fine feedback `W` (marginal `alpha` on levels `z_j`) is a hierarchical
//! expectation of a coarse feedback `W'` (marginal `alpha'` on levels `z'_k`)
//! when a conditional law `beta[j][k] = P(W' = z'_k | W = z_j)` exists with
//!
//! * every row a probability vector,
//! * `sum_k beta[j][k] z'_k = z_j` (the fine level is the conditional mean),
//! * `sum_j alpha_j beta[j][k] = alpha'_k` (the coarse marginal is reproduced).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp;
use crate::measure::DiscreteMeasure;
use crate::rng::RngSeed;
use crate::scale::OrdinalScale;

pub const ROW_TOLERANCE: f64 = 1e-12;
pub const BARYCENTER_TOLERANCE: f64 = 1e-9;
pub const MARGINAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    fine_marginal: DiscreteMeasure,
    coarse_scale: OrdinalScale,
    beta: Vec<Vec<f64>>,
}

impl CouplingSpec {
    pub fn fine_marginal(&self) -> &DiscreteMeasure {
        &self.fine_marginal
    }

    pub fn fine_scale(&self) -> &OrdinalScale {
        self.fine_marginal.scale()
    }

    pub fn coarse_scale(&self) -> &OrdinalScale {
        &self.coarse_scale
    }

    pub fn beta(&self) -> &[Vec<f64>] {
        &self.beta
    }

    /// `sum_j alpha_j beta[j][k]` for each coarse level.
    pub fn coarse_marginal(&self) -> DiscreteMeasure {
        let mut mass = vec![0.0; self.coarse_scale.len()];
        for (row, &a) in self.beta.iter().zip(self.fine_marginal.mass()) {
            for (acc, b) in mass.iter_mut().zip(row) {
                *acc += a * b;
            }
        }
        DiscreteMeasure::from_raw(self.coarse_scale.clone(), mass)
    }

    /// Exact `E[W' | W = z_j]` for every fine level.
    pub fn conditional_means(&self) -> Vec<f64> {
        self.beta
            .iter()
            .map(|row| row.iter().zip(self.coarse_scale.levels()).map(|(b, z)| b * z).sum())
            .collect()
    }

    /// Checks the coarse marginal against `target` level by level.
    pub fn verify_marginal(&self, target: &DiscreteMeasure) -> Result<()> {
        if target.scale().levels() != self.coarse_scale.levels() {
            return Err(Error::DimensionMismatch {
                expected: self.coarse_scale.len(),
                got: target.scale().len(),
            });
        }
        let got = self.coarse_marginal();
        for (k, (g, e)) in got.mass().iter().zip(target.mass()).enumerate() {
            if (g - e).abs() > MARGINAL_TOLERANCE {
                return Err(Error::MarginalMismatch {
                    index: k,
                    got: *g,
                    expected: *e,
                });
            }
        }
        Ok(())
    }
}

/// Validates a candidate coupling, naming the first violated condition.
pub fn build_coupling(
    fine_marginal: DiscreteMeasure,
    coarse_scale: OrdinalScale,
    beta: Vec<Vec<f64>>,
) -> Result<CouplingSpec> {
    let fine_levels = fine_marginal.scale().levels();
    if beta.len() != fine_levels.len() {
        return Err(Error::DimensionMismatch {
            expected: fine_levels.len(),
            got: beta.len(),
        });
    }
    for (j, row) in beta.iter().enumerate() {
        if row.len() != coarse_scale.len() {
            return Err(Error::DimensionMismatch {
                expected: coarse_scale.len(),
                got: row.len(),
            });
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|b| !(0.0..=1.0).contains(b)) || (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::RowNotStochastic { row: j, sum });
        }
        let mean: f64 = row.iter().zip(coarse_scale.levels()).map(|(b, z)| b * z).sum();
        if (mean - fine_levels[j]).abs() > BARYCENTER_TOLERANCE {
            return Err(Error::BarycenterViolation {
                row: j,
                mean,
                level: fine_levels[j],
            });
        }
    }
    Ok(CouplingSpec {
        fine_marginal,
        coarse_scale,
        beta,
    })
}

/// Builds the coupling and additionally requires its coarse marginal to
/// equal `coarse_marginal`.
pub fn build_coupling_to(
    fine_marginal: DiscreteMeasure,
    coarse_marginal: &DiscreteMeasure,
    beta: Vec<Vec<f64>>,
) -> Result<CouplingSpec> {
    let spec = build_coupling(fine_marginal, coarse_marginal.scale().clone(), beta)?;
    spec.verify_marginal(coarse_marginal)?;
    Ok(spec)
}

/// Couples any feedback on `[0, 1]` to binary feedback: a fine level `z`
/// becomes 1 with probability `z`.
pub fn to_binary_coupling(fine: &DiscreteMeasure) -> Result<CouplingSpec> {
    let binary = crate::scale::scale_preset(crate::scale::ScalePreset::Binary);
    let beta = fine.scale().levels().iter().map(|&z| vec![1.0 - z, z]).collect();
    build_coupling(fine.clone(), binary, beta)
}

/// Couples the oracle (a point mass at `oracle`) to an unbiased coarse feedback.
pub fn oracle_coupling(oracle: f64, coarse: &DiscreteMeasure) -> Result<CouplingSpec> {
    let mean = coarse.mean();
    if (mean - oracle).abs() > BARYCENTER_TOLERANCE {
        return Err(Error::BiasedMeasure { mean, oracle });
    }
    let fine = DiscreteMeasure::dirac(OrdinalScale::singleton(oracle)?, 0);
    build_coupling_to(fine, coarse, vec![coarse.mass().to_vec()])
}

/// Draws `n` pairs `(w, w')` with `w ~ fine_marginal`, `w' | w ~ beta[w]`.
pub fn sample_joint(coupling: &CouplingSpec, n: usize, seed: RngSeed) -> Vec<(f64, f64)> {
    let mut rng = seed.rng();
    let fine = coupling.fine_scale().levels();
    let coarse = coupling.coarse_scale().levels();
    (0..n)
        .map(|_| {
            let j = top_down_index(coupling.fine_marginal.mass(), rng.random());
            let k = top_down_index(&coupling.beta[j], rng.random());
            (fine[j], coarse[k])
        })
        .collect()
}

fn top_down_index(mass: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    for i in (0..mass.len()).rev() {
        cum += mass[i];
        if u < cum {
            return i;
        }
    }
    mass.iter().position(|&m| m > 0.0).unwrap_or(0)
}

/// Searches for a coupling making `fine` a hierarchical expectation of
/// `coarse` by solving the linear feasibility problem in `beta`. Returns
/// `Ok(None)` when no such coupling exists.
pub fn find_coupling(fine: &DiscreteMeasure, coarse: &DiscreteMeasure) -> Result<Option<CouplingSpec>> {
    let zf = fine.scale().levels();
    let zc = coarse.scale().levels();
    let (nf, nc) = (zf.len(), zc.len());
    let var = |j: usize, k: usize| j * nc + k;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for j in 0..nf {
        let mut row = vec![0.0; nf * nc];
        let mut bary = vec![0.0; nf * nc];
        for k in 0..nc {
            row[var(j, k)] = 1.0;
            bary[var(j, k)] = zc[k];
        }
        a.push(row);
        b.push(1.0);
        a.push(bary);
        b.push(zf[j]);
    }
    for k in 0..nc {
        let mut row = vec![0.0; nf * nc];
        for j in 0..nf {
            row[var(j, k)] = fine.mass()[j];
        }
        a.push(row);
        b.push(coarse.mass()[k]);
    }
    let Some(x) = lp::feasible_point(&a, &b, 1e-10) else {
        return Ok(None);
    };
    let beta: Vec<Vec<f64>> = (0..nf)
        .map(|j| {
            let row: Vec<f64> = (0..nc).map(|k| x[var(j, k)].clamp(0.0, 1.0)).collect();
            let s: f64 = row.iter().sum();
            row.into_iter().map(|v| v / s).collect()
        })
        .collect();
    match build_coupling_to(fine.clone(), coarse, beta) {
        Ok(spec) => Ok(Some(spec)),
        Err(Error::RowNotStochastic { .. } | Error::BarycenterViolation { .. } | Error::MarginalMismatch { .. }) => {
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Checks the three coupling conditions for vector-valued supports, e.g.
/// probability vectors coupled to one-hot vertices. `beta[j][k]` is the
/// probability of coarse point `k` given fine point `j`.
pub fn validate_vector_coupling(
    fine_points: &[Vec<f64>],
    fine_mass: &[f64],
    coarse_points: &[Vec<f64>],
    beta: &[Vec<f64>],
    coarse_mass: Option<&[f64]>,
) -> Result<()> {
    if beta.len() != fine_points.len() || fine_mass.len() != fine_points.len() {
        return Err(Error::DimensionMismatch {
            expected: fine_points.len(),
            got: beta.len(),
        });
    }
    for (j, (row, point)) in beta.iter().zip(fine_points).enumerate() {
        if row.len() != coarse_points.len() {
            return Err(Error::DimensionMismatch {
                expected: coarse_points.len(),
                got: row.len(),
            });
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|b| !(0.0..=1.0).contains(b)) || (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::RowNotStochastic { row: j, sum });
        }
        for (c, &target) in point.iter().enumerate() {
            let mean: f64 = row.iter().zip(coarse_points).map(|(b, q)| b * q[c]).sum();
            if (mean - target).abs() > BARYCENTER_TOLERANCE {
                return Err(Error::BarycenterViolation { row: j, mean, level: target });
            }
        }
    }
    if let Some(target) = coarse_mass {
        for (k, &expected) in target.iter().enumerate() {
            let got: f64 = beta.iter().zip(fine_mass).map(|(row, a)| a * row[k]).sum();
            if (got - expected).abs() > MARGINAL_TOLERANCE {
                return Err(Error::MarginalMismatch { index: k, got, expected });
            }
        }
    }
    Ok(())
}
