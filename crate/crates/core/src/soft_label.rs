//! Soft labels for k-class classification: oracle, one-hot, distilled and
//! teacher-sampled labels, and a Rademacher comparison between them.
//!
//! A [`KClassWorld`] draws features `x` and sets `y_oracle(x) = softmax(W x)`.
//! Hypotheses are `k x d` matrices stored row-major in a flat vector; the
//! logits of `h` at `x` are `h x`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::{rademacher_from_losses, HypothesisClass, RadEstimate, RadMethod, RadMode, ORDERING_Z};
use crate::coupling::validate_vector_coupling;
use crate::error::{Error, Result};
use crate::feedback::mean_stderr;
use crate::item::dot;
use crate::losses::LOG_CLAMP_EPS;
use crate::measure::MASS_TOLERANCE;
use crate::rng::{RngSeed, SimRng};

pub const DEFAULT_CLASSES: usize = 3;
pub const DEFAULT_ENSEMBLE_SIZE: usize = 32;

/// Probability vector on the k-simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SoftLabel {
    probs: Vec<f64>,
}

impl SoftLabel {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidMeasure("soft label needs at least one class".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("negative or non-finite entry in {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("soft label sums to {sum}")));
        }
        Ok(Self { probs })
    }

    pub fn one_hot(k: usize, class: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[class] = 1.0;
        Self { probs }
    }

    pub fn uniform(k: usize) -> Self {
        Self { probs: vec![1.0 / k as f64; k] }
    }

    /// Softmax of `logits`.
    pub fn softmax(logits: &[f64]) -> Self {
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        Self {
            probs: exps.iter().map(|e| e / z).collect(),
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn classes(&self) -> usize {
        self.probs.len()
    }

    /// Class drawn from a uniform in `[0, 1)`, scanning from the last class
    /// down so that for `k = 2` class 1 is chosen iff `u < probs[1]`.
    pub fn class_for_uniform(&self, u: f64) -> usize {
        let mut cum = 0.0;
        for j in (0..self.probs.len()).rev() {
            if self.probs[j] <= 0.0 {
                continue;
            }
            cum += self.probs[j];
            if u < cum {
                return j;
            }
        }
        self.probs.iter().position(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn sample_one_hot(&self, u: f64) -> Self {
        Self::one_hot(self.classes(), self.class_for_uniform(u))
    }

    /// Entropy `-sum p ln p`.
    pub fn entropy(&self) -> f64 {
        -self.probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>()
    }

    /// Mean of several labels with the same number of classes.
    pub fn average(labels: &[SoftLabel]) -> Result<Self> {
        let first = labels.first().ok_or(Error::EmptySample)?;
        let k = first.classes();
        let mut probs = vec![0.0; k];
        for l in labels {
            if l.classes() != k {
                return Err(Error::DimensionMismatch { expected: k, got: l.classes() });
            }
            for (p, q) in probs.iter_mut().zip(&l.probs) {
                *p += q;
            }
        }
        let m = labels.len() as f64;
        probs.iter_mut().for_each(|p| *p /= m);
        Ok(Self { probs })
    }
}

/// `-sum_j label_j ln softmax(logits)_j`, each probability clamped to
/// `[eps, 1 - eps]` as in the binary losses.
pub fn ce_loss_multiclass(label: &SoftLabel, logits: &[f64]) -> Result<f64> {
    if logits.len() != label.classes() {
        return Err(Error::DimensionMismatch {
            expected: label.classes(),
            got: logits.len(),
        });
    }
    Ok(ce_unchecked(label.probs(), logits))
}

fn ce_unchecked(label: &[f64], logits: &[f64]) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    label
        .iter()
        .zip(logits)
        .filter(|(y, _)| **y != 0.0)
        .map(|(y, l)| {
            let p = (l - lse).exp().clamp(LOG_CLAMP_EPS, 1.0 - LOG_CLAMP_EPS);
            -y * p.ln()
        })
        .sum()
}

fn logits(h: &[f64], k: usize, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..k).map(|j| dot(&h[j * d..(j + 1) * d], x)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSource {
    /// Standard normal coordinates.
    Gaussian,
    /// Uniform over a finite list of points.
    Finite(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KClassWorld {
    pub classes: usize,
    pub dimension: usize,
    /// `classes x dimension`.
    pub weights: Vec<Vec<f64>>,
    pub features: FeatureSource,
}

impl KClassWorld {
    pub fn new(weights: Vec<Vec<f64>>, features: FeatureSource) -> Result<Self> {
        let classes = weights.len();
        if classes < 2 {
            return Err(Error::InvalidConfig("a k-class world needs k >= 2".into()));
        }
        let dimension = weights[0].len();
        if dimension == 0 {
            return Err(Error::InvalidConfig("feature dimension must be at least 1".into()));
        }
        if let Some(row) = weights.iter().find(|r| r.len() != dimension) {
            return Err(Error::DimensionMismatch { expected: dimension, got: row.len() });
        }
        if let FeatureSource::Finite(points) = &features {
            if points.is_empty() {
                return Err(Error::InvalidConfig("finite feature source is empty".into()));
            }
            if let Some(p) = points.iter().find(|p| p.len() != dimension) {
                return Err(Error::DimensionMismatch { expected: dimension, got: p.len() });
            }
        }
        Ok(Self { classes, dimension, weights, features })
    }

    /// Gaussian features and `N(0, weight_scale^2)` weights.
    pub fn gaussian(classes: usize, dimension: usize, weight_scale: f64, seed: RngSeed) -> Result<Self> {
        let mut rng = seed.rng();
        let weights = (0..classes)
            .map(|_| {
                (0..dimension)
                    .map(|_| weight_scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Self::new(weights, FeatureSource::Gaussian)
    }

    pub fn oracle(&self, x: &[f64]) -> SoftLabel {
        let l: Vec<f64> = self.weights.iter().map(|w| dot(w, x)).collect();
        SoftLabel::softmax(&l)
    }

    pub fn sample_features(&self, n: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| match &self.features {
                FeatureSource::Gaussian => (0..self.dimension).map(|_| rng.sample(StandardNormal)).collect(),
                FeatureSource::Finite(points) => points[rng.random_range(0..points.len())].clone(),
            })
            .collect()
    }
}

/// Enumerable two-class instance: three one-hot feature points, class-1
/// probabilities about 0.77, 0.31 and 0.60, and eight hypotheses whose
/// class-1 logit at each point is either 2 or -1.
pub fn two_class_instance() -> (KClassWorld, HypothesisClass) {
    let points = (0..3)
        .map(|i| (0..3).map(|c| if c == i { 1.0 } else { 0.0 }).collect())
        .collect();
    let world = KClassWorld::new(vec![vec![0.0; 3], vec![1.2, -0.8, 0.4]], FeatureSource::Finite(points))
        .expect("valid builtin world");
    let class = HypothesisClass::FiniteSet(
        (0..8u32)
            .map(|mask| {
                let mut h = vec![0.0; 6];
                for c in 0..3 {
                    h[3 + c] = if mask >> c & 1 == 1 { 2.0 } else { -1.0 };
                }
                h
            })
            .collect(),
    );
    (world, class)
}

/// How each ensemble member is fitted to its resampled labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "fit")]
pub enum MemberFit {
    /// Linear softmax trained by full-batch gradient descent from zero.
    Softmax { learning_rate: f64, epochs: usize, l2: f64 },
    /// Maximum-likelihood fit of a saturated model: the class frequencies
    /// among training points with identical features. Unseen features fall
    /// back to the overall class frequencies.
    Frequency,
}

impl Default for MemberFit {
    fn default() -> Self {
        Self::Softmax {
            learning_rate: 1.0,
            epochs: 300,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    Softmax { classes: usize, weights: Vec<f64> },
    Frequency { table: Vec<(Vec<f64>, SoftLabel)>, fallback: SoftLabel },
}

impl Member {
    pub fn fit(features: &[Vec<f64>], labels: &[usize], classes: usize, fit: MemberFit) -> Result<Self> {
        let first = features.first().ok_or(Error::EmptySample)?;
        let d = first.len();
        match fit {
            MemberFit::Softmax { learning_rate, epochs, l2 } => {
                let mut w = vec![0.0; classes * d];
                let n = features.len() as f64;
                for _ in 0..epochs {
                    let mut g = vec![0.0; w.len()];
                    for (x, &y) in features.iter().zip(labels) {
                        let p = SoftLabel::softmax(&logits(&w, classes, x));
                        for j in 0..classes {
                            let r = p.probs[j] - if j == y { 1.0 } else { 0.0 };
                            for c in 0..d {
                                g[j * d + c] += r * x[c];
                            }
                        }
                    }
                    for (wi, gi) in w.iter_mut().zip(&g) {
                        *wi -= learning_rate * (gi / n + l2 * *wi);
                    }
                }
                if w.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonfiniteLoss(epochs));
                }
                Ok(Self::Softmax { classes, weights: w })
            }
            MemberFit::Frequency => {
                let mut table: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
                let mut overall = vec![0.0; classes];
                for (x, &y) in features.iter().zip(labels) {
                    overall[y] += 1.0;
                    match table.iter_mut().find(|(p, _)| p == x) {
                        Some((_, counts)) => counts[y] += 1.0,
                        None => {
                            let mut counts = vec![0.0; classes];
                            counts[y] = 1.0;
                            table.push((x.clone(), counts));
                        }
                    }
                }
                let normalize = |c: Vec<f64>| {
                    let s: f64 = c.iter().sum();
                    SoftLabel { probs: c.iter().map(|v| v / s).collect() }
                };
                Ok(Self::Frequency {
                    table: table.into_iter().map(|(x, c)| (x, normalize(c))).collect(),
                    fallback: normalize(overall),
                })
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> SoftLabel {
        match self {
            Self::Softmax { classes, weights } => SoftLabel::softmax(&logits(weights, *classes, x)),
            Self::Frequency { table, fallback } => table
                .iter()
                .find(|(p, _)| p.as_slice() == x)
                .map(|(_, l)| l.clone())
                .unwrap_or_else(|| fallback.clone()),
        }
    }
}

/// Teacher whose output is the mean prediction of its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherEnsemble {
    members: Vec<Member>,
}

impl TeacherEnsemble {
    pub fn from_members(members: Vec<Member>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidConfig("teacher ensemble needs at least one member".into()));
        }
        Ok(Self { members })
    }

    /// Fits `m` members, each on the pool features with a fresh one-hot
    /// labeling drawn from the oracle. Member `i` uses `seed.derive(i)`.
    pub fn train(world: &KClassWorld, pool: &[Vec<f64>], m: usize, fit: MemberFit, seed: RngSeed) -> Result<Self> {
        let oracles: Vec<SoftLabel> = pool.iter().map(|x| world.oracle(x)).collect();
        let members = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut rng = seed.derive(i as u64).rng();
                let labels: Vec<usize> = oracles.iter().map(|o| o.class_for_uniform(rng.random())).collect();
                Member::fit(pool, &labels, world.classes, fit)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_members(members)
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn predict(&self, x: &[f64]) -> SoftLabel {
        let preds: Vec<SoftLabel> = self.members.iter().map(|m| m.predict(x)).collect();
        SoftLabel::average(&preds).expect("nonempty ensemble with consistent classes")
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Paradigm<'a> {
    Oracle,
    Original,
    Distill(&'a TeacherEnsemble),
    SampleFromTeacher(&'a TeacherEnsemble),
}

/// `n` labeled examples under a paradigm. Features come from
/// `seed.derive(0)` and the sampling uniforms from `seed.derive(1)`, so all
/// paradigms share features and uniforms for a given seed.
pub fn paradigm_dataset(world: &KClassWorld, paradigm: Paradigm<'_>, n: usize, seed: RngSeed) -> Vec<(Vec<f64>, SoftLabel)> {
    let features = world.sample_features(n, &mut seed.derive(0).rng());
    let mut urng = seed.derive(1).rng();
    features
        .into_iter()
        .map(|x| {
            let u: f64 = urng.random();
            let label = match paradigm {
                Paradigm::Oracle => world.oracle(&x),
                Paradigm::Original => world.oracle(&x).sample_one_hot(u),
                Paradigm::Distill(t) => t.predict(&x),
                Paradigm::SampleFromTeacher(t) => t.predict(&x).sample_one_hot(u),
            };
            (x, label)
        })
        .collect()
}

/// Teacher used by [`variance_reduction_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "teacher")]
pub enum Teacher {
    /// Outputs the oracle probabilities.
    Oracle,
    /// Reproduces the observed one-hot labels.
    Interpolating,
    /// Ensemble of `members` fits on a pool made of the dataset features
    /// followed by `pool_size - n` fresh draws.
    Ensemble { members: usize, fit: MemberFit, pool_size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    pub diff: f64,
    pub stderr: f64,
}

impl Gap {
    fn of(xs: &[f64]) -> Self {
        let (diff, stderr) = mean_stderr(xs);
        Self { diff, stderr }
    }

    /// Nonnegative within `ORDERING_Z` standard errors.
    pub fn nonnegative(&self) -> bool {
        self.diff >= -ORDERING_Z * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption2Check {
    /// Mean of `teacher - oracle` per class, over items and replicas.
    pub mean_residual: Vec<f64>,
    pub stderr: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub rad_y: RadEstimate,
    pub rad_teacher: RadEstimate,
    pub rad_sampled_teacher: RadEstimate,
    pub rad_oracle: RadEstimate,
    /// `rad_y - rad_teacher`.
    pub reduced_variance: Gap,
    /// `rad_sampled_teacher - rad_teacher`.
    pub sampling_gap: Gap,
    /// `rad_y - rad_oracle`.
    pub oracle_gap: Gap,
    pub assumption2: Assumption2Check,
    /// Excess held-out loss of the teacher-label minimizer over the oracle minimizer.
    pub bias: Gap,
    pub he_witnesses_valid: bool,
    /// `[y, teacher, sampled_teacher, oracle]` per replica.
    pub per_replica: Vec<[f64; 4]>,
}

fn loss_matrix(class: &[Vec<f64>], k: usize, xs: &[Vec<f64>], labels: &[SoftLabel]) -> Vec<Vec<f64>> {
    class
        .iter()
        .map(|h| xs.iter().zip(labels).map(|(x, y)| ce_unchecked(y.probs(), &logits(h, k, x))).collect())
        .collect()
}

fn argmin_hypothesis<'a>(class: &'a [Vec<f64>], k: usize, xs: &[Vec<f64>], labels: &[SoftLabel]) -> &'a [f64] {
    let m = loss_matrix(class, k, xs, labels);
    let best = m
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if s < acc.1 { (i, s) } else { acc });
    &class[best.0]
}

fn he_witness_valid(label: &SoftLabel) -> bool {
    let k = label.classes();
    let vertices: Vec<Vec<f64>> = (0..k).map(|j| SoftLabel::one_hot(k, j).probs).collect();
    validate_vector_coupling(
        std::slice::from_ref(&label.probs),
        &[1.0],
        &vertices,
        std::slice::from_ref(&label.probs),
        Some(label.probs()),
    )
    .is_ok()
}

struct Replica {
    rads: [f64; 4],
    residual: Vec<f64>,
    bias: f64,
    he_ok: bool,
}

const EVAL_ITEMS: usize = 512;

/// Expected Rademacher complexities of the four paradigms with common
/// random numbers and exact sign enumeration. Replica `r` draws features
/// and label uniforms from `seed.derive2(r, 0)`, signs from
/// `seed.derive2(r, 1)` and the teacher from `seed.derive2(r, 2)`.
pub fn variance_reduction_report(
    world: &KClassWorld,
    teacher: &Teacher,
    class: &HypothesisClass,
    n: usize,
    n_datasets: usize,
    seed: RngSeed,
) -> Result<VarianceReport> {
    class.validate()?;
    let HypothesisClass::FiniteSet(hyps) = class else {
        return Err(Error::InvalidClass("soft-label complexities need a finite class".into()));
    };
    let k = world.classes;
    if hyps[0].len() != k * world.dimension {
        return Err(Error::DimensionMismatch {
            expected: k * world.dimension,
            got: hyps[0].len(),
        });
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if n > crate::complexity::MAX_EXACT_ITEMS {
        return Err(Error::InfeasibleExact(format!("{n} items exceeds {}", crate::complexity::MAX_EXACT_ITEMS)));
    }
    if n_datasets == 0 {
        return Err(Error::InvalidConfig("n_datasets must be at least 1".into()));
    }
    if let Teacher::Ensemble { members, pool_size, .. } = teacher {
        if *members == 0 || *pool_size < n {
            return Err(Error::InvalidConfig("ensemble needs members >= 1 and pool_size >= n".into()));
        }
    }

    let eval_seed = seed.derive(u64::MAX);
    let eval_x = world.sample_features(EVAL_ITEMS, &mut eval_seed.rng());
    let eval_oracle: Vec<SoftLabel> = eval_x.iter().map(|x| world.oracle(x)).collect();
    let h_star = argmin_hypothesis(hyps, k, &eval_x, &eval_oracle);

    let replicas = (0..n_datasets)
        .into_par_iter()
        .map(|r| -> Result<Replica> {
            let data_seed = seed.derive2(r as u64, 0);
            let sign_seed = seed.derive2(r as u64, 1);
            let teacher_seed = seed.derive2(r as u64, 2);
            let mut frng = data_seed.derive(0).rng();
            let xs = world.sample_features(n, &mut frng);
            let mut urng = data_seed.derive(1).rng();
            let us: Vec<f64> = (0..n).map(|_| urng.random()).collect();
            let oracle: Vec<SoftLabel> = xs.iter().map(|x| world.oracle(x)).collect();
            let y: Vec<SoftLabel> = oracle.iter().zip(&us).map(|(o, &u)| o.sample_one_hot(u)).collect();
            let teacher_out: Vec<SoftLabel> = match teacher {
                Teacher::Oracle => oracle.clone(),
                Teacher::Interpolating => y.clone(),
                Teacher::Ensemble { members, fit, pool_size } => {
                    let mut pool = xs.clone();
                    pool.extend(world.sample_features(pool_size - n, &mut frng));
                    let t = TeacherEnsemble::train(world, &pool, *members, *fit, teacher_seed)?;
                    xs.iter().map(|x| t.predict(x)).collect()
                }
            };
            let sampled: Vec<SoftLabel> = teacher_out.iter().zip(&us).map(|(t, &u)| t.sample_one_hot(u)).collect();

            let rad = |labels: &[SoftLabel]| -> Result<f64> {
                Ok(rademacher_from_losses(&loss_matrix(hyps, k, &xs, labels), RadMode::Exact, sign_seed)?.value)
            };
            let rads = [rad(&y)?, rad(&teacher_out)?, rad(&sampled)?, rad(&oracle)?];

            let mut residual = vec![0.0; k];
            for (t, o) in teacher_out.iter().zip(&oracle) {
                for j in 0..k {
                    residual[j] += (t.probs[j] - o.probs[j]) / n as f64;
                }
            }

            let h_t = argmin_hypothesis(hyps, k, &xs, &teacher_out);
            let mut yrng = data_seed.derive(2).rng();
            let bias = eval_x
                .iter()
                .zip(&eval_oracle)
                .map(|(x, o)| {
                    let y_prime = o.sample_one_hot(yrng.random());
                    ce_unchecked(y_prime.probs(), &logits(h_t, k, x)) - ce_unchecked(y_prime.probs(), &logits(h_star, k, x))
                })
                .sum::<f64>()
                / EVAL_ITEMS as f64;

            let he_ok = teacher_out.iter().all(he_witness_valid);
            Ok(Replica { rads, residual, bias, he_ok })
        })
        .collect::<Result<Vec<_>>>()?;

    let column = |i: usize| -> Vec<f64> { replicas.iter().map(|r| r.rads[i]).collect() };
    let estimate = |i: usize| {
        let (value, stderr) = mean_stderr(&column(i));
        RadEstimate {
            value,
            stderr,
            method: if n_datasets == 1 { RadMethod::ExactEnumeration } else { RadMethod::MonteCarlo },
        }
    };
    let gap = |a: usize, b: usize| {
        let d: Vec<f64> = replicas.iter().map(|r| r.rads[a] - r.rads[b]).collect();
        Gap::of(&d)
    };

    let mut mean_residual = Vec::with_capacity(k);
    let mut residual_se = Vec::with_capacity(k);
    for j in 0..k {
        let col: Vec<f64> = replicas.iter().map(|r| r.residual[j]).collect();
        let (m, se) = mean_stderr(&col);
        mean_residual.push(m);
        residual_se.push(se);
    }
    let pass = mean_residual
        .iter()
        .zip(&residual_se)
        .all(|(m, se)| m.abs() <= ORDERING_Z * se || m.abs() <= 1e-12);
    let biases: Vec<f64> = replicas.iter().map(|r| r.bias).collect();

    Ok(VarianceReport {
        rad_y: estimate(0),
        rad_teacher: estimate(1),
        rad_sampled_teacher: estimate(2),
        rad_oracle: estimate(3),
        reduced_variance: gap(0, 1),
        sampling_gap: gap(2, 1),
        oracle_gap: gap(0, 3),
        assumption2: Assumption2Check {
            mean_residual,
            stderr: residual_se,
            pass,
        },
        bias: Gap::of(&biases),
        he_witnesses_valid: replicas.iter().all(|r| r.he_ok),
        per_replica: replicas.iter().map(|r| r.rads).collect(),
    })
}
