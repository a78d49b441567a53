//! Empirical and expected Rademacher complexity of `loss ∘ H`.
//!
//! For a labeled sample of size `n` the empirical complexity is
//! `(1/n) E_eps[ sup_h sum_i eps_i * loss(Z_i, h(item_i)) ]` with independent
//! uniform signs `eps_i`. Exact mode enumerates all `2^n` sign vectors;
//! Monte Carlo mode averages random sign vectors. Hypotheses are linear
//! reward models scoring a pair by `<w, features1 - features2>`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::mean_stderr;
use crate::item::{dot, norm, PreferenceItem};
use crate::losses::LossKind;
use crate::rng::RngSeed;
use crate::scale::FeedbackSystem;
use crate::world::{generate_dataset, SyntheticWorld};

/// Exact enumeration is refused above this many items.
pub const MAX_EXACT_ITEMS: usize = 20;

/// Upper bound on lattice points generated for a `LinearBall` class.
pub const MAX_GRID_POINTS: usize = 200_000;

/// Number of standard errors used for ordering verdicts.
pub const ORDERING_Z: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HypothesisClass {
    FiniteSet(Vec<Vec<f64>>),
    /// `{w : |w| <= norm_bound}`; the supremum is searched over a lattice of
    /// spacing `grid_resolution` plus gradient refinement, which yields a
    /// lower bound on the true supremum.
    LinearBall {
        dimension: usize,
        norm_bound: f64,
        grid_resolution: f64,
    },
}

impl HypothesisClass {
    pub fn dimension(&self) -> Option<usize> {
        match self {
            Self::FiniteSet(ws) => ws.first().map(Vec::len),
            Self::LinearBall { dimension, .. } => Some(*dimension),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::FiniteSet(ws) => {
                let first = ws.first().ok_or(Error::EmptyClass)?;
                if let Some(w) = ws.iter().find(|w| w.len() != first.len()) {
                    return Err(Error::DimensionMismatch {
                        expected: first.len(),
                        got: w.len(),
                    });
                }
                Ok(())
            }
            Self::LinearBall {
                dimension,
                norm_bound,
                grid_resolution,
            } => {
                if *dimension == 0 || !(*norm_bound > 0.0) || !(*grid_resolution > 0.0) {
                    return Err(Error::InvalidClass(
                        "linear ball needs dimension >= 1, positive norm bound and resolution".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Lattice points `k * resolution` inside the ball.
    fn grid(&self) -> Result<Vec<Vec<f64>>> {
        let Self::LinearBall {
            dimension,
            norm_bound,
            grid_resolution,
        } = *self
        else {
            unreachable!("grid is only defined for linear balls")
        };
        let steps = (norm_bound / grid_resolution).floor() as i64;
        let per_axis = (2 * steps + 1) as f64;
        if per_axis.powi(dimension as i32) > MAX_GRID_POINTS as f64 {
            return Err(Error::InvalidClass(format!(
                "grid of {per_axis}^{dimension} points exceeds {MAX_GRID_POINTS}"
            )));
        }
        let mut points = Vec::new();
        let mut idx = vec![-steps; dimension];
        loop {
            let w: Vec<f64> = idx.iter().map(|&k| k as f64 * grid_resolution).collect();
            if norm(&w) <= norm_bound + 1e-12 {
                points.push(w);
            }
            let mut c = 0;
            loop {
                if c == dimension {
                    return Ok(points);
                }
                idx[c] += 1;
                if idx[c] > steps {
                    idx[c] = -steps;
                    c += 1;
                } else {
                    break;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RadMode {
    Exact,
    MonteCarlo { n_eps: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadMethod {
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadEstimate {
    pub value: f64,
    pub stderr: f64,
    pub method: RadMethod,
}

impl RadEstimate {
    fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            method: RadMethod::ExactEnumeration,
        }
    }
}

/// Rademacher complexity of a finite class given its loss matrix
/// `losses[h][i] = loss(Z_i, h(item_i))`.
pub fn rademacher_from_losses(losses: &[Vec<f64>], mode: RadMode, seed: RngSeed) -> Result<RadEstimate> {
    let first = losses.first().ok_or(Error::EmptyClass)?;
    let n = first.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let sup = |signs: &dyn Fn(usize) -> bool| -> f64 {
        losses
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(i, l)| if signs(i) { *l } else { -*l })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    };
    match mode {
        RadMode::Exact => {
            if n > MAX_EXACT_ITEMS {
                return Err(Error::InfeasibleExact(format!("{n} items exceeds {MAX_EXACT_ITEMS}")));
            }
            let count = 1u64 << n;
            let total: f64 = (0..count).map(|mask| sup(&|i| mask >> i & 1 == 1)).sum();
            Ok(RadEstimate::exact(total / count as f64 / n as f64))
        }
        RadMode::MonteCarlo { n_eps } => {
            let mut rng = seed.rng();
            let draws: Vec<f64> = (0..n_eps.max(1))
                .map(|_| {
                    let signs: Vec<bool> = (0..n).map(|_| rng.random()).collect();
                    sup(&|i| signs[i]) / n as f64
                })
                .collect();
            let (value, stderr) = mean_stderr(&draws);
            Ok(RadEstimate {
                value,
                stderr,
                method: RadMethod::MonteCarlo,
            })
        }
    }
}

struct LabeledDiffs {
    diffs: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

fn prepare(data: &[PreferenceItem], class: &HypothesisClass) -> Result<LabeledDiffs> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    class.validate()?;
    let dim = class.dimension().unwrap_or(0);
    let mut diffs = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for it in data {
        if it.dimension() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: it.dimension(),
            });
        }
        diffs.push(it.feature_diff());
        labels.push(it.label_or_err()?);
    }
    Ok(LabeledDiffs { diffs, labels })
}

fn loss_row(w: &[f64], data: &LabeledDiffs, loss: LossKind) -> Vec<f64> {
    data.diffs
        .iter()
        .zip(&data.labels)
        .map(|(x, &z)| loss.eval(z, dot(w, x)))
        .collect()
}

/// Empirical Rademacher complexity of `loss ∘ class` on a labeled sample.
pub fn empirical_rademacher(
    data: &[PreferenceItem],
    class: &HypothesisClass,
    loss: LossKind,
    mode: RadMode,
    seed: RngSeed,
) -> Result<RadEstimate> {
    let prepared = prepare(data, class)?;
    match class {
        HypothesisClass::FiniteSet(ws) => {
            let losses: Vec<Vec<f64>> = ws.iter().map(|w| loss_row(w, &prepared, loss)).collect();
            rademacher_from_losses(&losses, mode, seed)
        }
        HypothesisClass::LinearBall { norm_bound, .. } => {
            let n_eps = match mode {
                RadMode::Exact => {
                    return Err(Error::InfeasibleExact(
                        "exact supremum over a linear ball is not computable".into(),
                    ))
                }
                RadMode::MonteCarlo { n_eps } => n_eps.max(1),
            };
            let grid = class.grid()?;
            let losses: Vec<Vec<f64>> = grid.iter().map(|w| loss_row(w, &prepared, loss)).collect();
            let n = prepared.labels.len();
            let mut rng = seed.rng();
            let draws: Vec<f64> = (0..n_eps)
                .map(|_| {
                    let signs: Vec<f64> = (0..n).map(|_| if rng.random() { 1.0 } else { -1.0 }).collect();
                    let scores: Vec<f64> = losses.iter().map(|row| dot(row, &signs)).collect();
                    let mut best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if matches!(loss, LossKind::CrossEntropy) {
                        best = best.max(refine_ball_sup(&grid, &scores, &prepared, &signs, *norm_bound));
                    }
                    best / n as f64
                })
                .collect();
            let (value, stderr) = mean_stderr(&draws);
            Ok(RadEstimate {
                value,
                stderr,
                method: RadMethod::MonteCarlo,
            })
        }
    }
}

/// Projected gradient ascent on `sum_i eps_i ce(Z_i, <w, x_i>)` from the
/// best few grid points. Returns the best objective value visited.
fn refine_ball_sup(grid: &[Vec<f64>], scores: &[f64], data: &LabeledDiffs, signs: &[f64], bound: f64) -> f64 {
    const STARTS: usize = 3;
    const STEPS: usize = 60;
    let loss = LossKind::CrossEntropy;
    let objective = |w: &[f64]| -> f64 {
        data.diffs
            .iter()
            .zip(&data.labels)
            .zip(signs)
            .map(|((x, &z), s)| s * loss.eval(z, dot(w, x)))
            .sum()
    };
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut best = f64::NEG_INFINITY;
    for &start in order.iter().take(STARTS) {
        let mut w = grid[start].clone();
        let mut step = 0.25 * bound;
        let mut current = objective(&w);
        best = best.max(current);
        for _ in 0..STEPS {
            let mut g = vec![0.0; w.len()];
            for ((x, &z), s) in data.diffs.iter().zip(&data.labels).zip(signs) {
                let c = s * loss.grad(z, dot(&w, x));
                for (gj, xj) in g.iter_mut().zip(x) {
                    *gj += c * xj;
                }
            }
            let gn = norm(&g);
            if gn == 0.0 {
                break;
            }
            let mut cand: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a + step * b / gn).collect();
            let cn = norm(&cand);
            if cn > bound {
                cand.iter_mut().for_each(|v| *v *= bound / cn);
            }
            let value = objective(&cand);
            if value > current {
                w = cand;
                current = value;
                best = best.max(value);
            } else {
                step *= 0.5;
            }
        }
    }
    best
}

/// Distribution of datasets: `n` items from a synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceDistribution {
    pub world: SyntheticWorld,
    pub n: usize,
}

/// Expected complexities for several feedback systems on common random
/// numbers: replica `r` uses the same features, label uniforms and sign
/// vectors for every system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrnRademacher {
    pub systems: Vec<String>,
    pub estimates: Vec<RadEstimate>,
    /// `per_replica[r][s]`: empirical complexity of system `s` on replica `r`.
    pub per_replica: Vec<Vec<f64>>,
}

impl CrnRademacher {
    /// Mean and standard error of the paired difference `system b - system a`.
    pub fn paired_diff(&self, a: usize, b: usize) -> (f64, f64) {
        let diffs: Vec<f64> = self.per_replica.iter().map(|row| row[b] - row[a]).collect();
        mean_stderr(&diffs)
    }
}

pub fn expected_rademacher_crn(
    dist: &PreferenceDistribution,
    systems: &[FeedbackSystem],
    class: &HypothesisClass,
    loss: LossKind,
    n_datasets: usize,
    mode: RadMode,
    seed: RngSeed,
) -> Result<CrnRademacher> {
    if n_datasets == 0 {
        return Err(Error::InvalidConfig("n_datasets must be at least 1".into()));
    }
    if dist.n == 0 {
        return Err(Error::EmptySample);
    }
    let per_replica = (0..n_datasets)
        .into_par_iter()
        .map(|r| {
            let data_seed = seed.derive2(r as u64, 0);
            let sign_seed = seed.derive2(r as u64, 1);
            systems
                .iter()
                .map(|sys| {
                    let data = generate_dataset(&dist.world, dist.n, sys, data_seed)?;
                    Ok(empirical_rademacher(&data, class, loss, mode, sign_seed)?.value)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let estimates = (0..systems.len())
        .map(|s| {
            let col: Vec<f64> = per_replica.iter().map(|row| row[s]).collect();
            let (value, stderr) = mean_stderr(&col);
            let method = if n_datasets == 1 && mode == RadMode::Exact {
                RadMethod::ExactEnumeration
            } else {
                RadMethod::MonteCarlo
            };
            RadEstimate { value, stderr, method }
        })
        .collect();
    Ok(CrnRademacher {
        systems: systems.iter().map(FeedbackSystem::name).collect(),
        estimates,
        per_replica,
    })
}

/// Expected Rademacher complexity of one feedback system, averaged over
/// `n_datasets` independently drawn labeled datasets.
pub fn expected_rademacher(
    dist: &PreferenceDistribution,
    system: &FeedbackSystem,
    class: &HypothesisClass,
    loss: LossKind,
    n_datasets: usize,
    mode: RadMode,
    seed: RngSeed,
) -> Result<RadEstimate> {
    let crn = expected_rademacher_crn(dist, std::slice::from_ref(system), class, loss, n_datasets, mode, seed)?;
    Ok(crn.estimates[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingRow {
    pub system: String,
    pub estimate: RadEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub first: String,
    pub second: String,
    /// `Rad(second) - Rad(first)` averaged over paired replicas.
    pub diff: f64,
    pub stderr: f64,
    /// `Rad(first) <= Rad(second)` within `ORDERING_Z` standard errors.
    pub first_le_second: bool,
    /// The difference is positive by more than `ORDERING_Z` standard errors.
    pub strictly_less: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub rows: Vec<OrderingRow>,
    pub comparisons: Vec<PairComparison>,
}

impl OrderingReport {
    pub fn comparison(&self, first: &str, second: &str) -> Option<&PairComparison> {
        self.comparisons
            .iter()
            .find(|c| c.first == first && c.second == second)
    }
}

/// Expected complexities for the systems in the given order, with a paired
/// comparison for every ordered pair `(i, j)`, `i < j`.
pub fn ordering_report(
    systems: &[FeedbackSystem],
    dist: &PreferenceDistribution,
    class: &HypothesisClass,
    loss: LossKind,
    n_datasets: usize,
    mode: RadMode,
    seed: RngSeed,
) -> Result<OrderingReport> {
    let crn = expected_rademacher_crn(dist, systems, class, loss, n_datasets, mode, seed)?;
    let rows = crn
        .systems
        .iter()
        .zip(&crn.estimates)
        .map(|(s, e)| OrderingRow {
            system: s.clone(),
            estimate: *e,
        })
        .collect();
    let mut comparisons = Vec::new();
    for i in 0..systems.len() {
        for j in i + 1..systems.len() {
            let (diff, stderr) = crn.paired_diff(i, j);
            comparisons.push(PairComparison {
                first: crn.systems[i].clone(),
                second: crn.systems[j].clone(),
                diff,
                stderr,
                first_le_second: diff >= -ORDERING_Z * stderr,
                strictly_less: diff > ORDERING_Z * stderr,
            });
        }
    }
    Ok(OrderingReport { rows, comparisons })
}

/// Small enumerable instance: four items in two dimensions, temperature 1,
/// and eight hypotheses evenly spaced on the circle of radius 2.
pub fn tiny_instance() -> (PreferenceDistribution, HypothesisClass) {
    let world = SyntheticWorld::with_weights(vec![1.5, -1.0], 1.0).expect("valid builtin world");
    let class = HypothesisClass::FiniteSet(
        (0..8)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 8.0;
                vec![2.0 * t.cos(), 2.0 * t.sin()]
            })
            .collect(),
    );
    (PreferenceDistribution { world, n: 4 }, class)
}
