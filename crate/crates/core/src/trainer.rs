//! Linear Bradley-Terry reward models trained by gradient descent on
//! ordinal labels, plus the granularity and tied-ratio experiments.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::item::{dot, PreferenceItem};
use crate::losses::LossKind;
use crate::rng::RngSeed;
use crate::scale::{scale_preset, FeedbackSystem, ScalePreset};
use crate::world::{generate_dataset, label_with_uniform, SyntheticWorld};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Minibatch size; 0 (or anything >= n) means full batch.
    pub batch_size: usize,
    pub l2: f64,
    pub momentum: f64,
    pub seed: RngSeed,
    /// Std of the normal initial weights.
    pub init_scale: f64,
    /// Evaluate every this many epochs (epoch 0 and the last epoch are always included).
    pub eval_every: usize,
    /// Size of the held-out ID and OOD sets built by the sweeps.
    pub eval_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::CrossEntropy,
            learning_rate: 1.0,
            epochs: 300,
            batch_size: 0,
            l2: 0.0,
            momentum: 0.0,
            seed: RngSeed(0),
            init_scale: 0.01,
            eval_every: 10,
            eval_size: 2000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2 >= 0.0) {
            return bad("l2 must be nonnegative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub epoch: usize,
    pub oracle_ce: f64,
    pub id_accuracy: f64,
    pub ood_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub curve: Vec<EvalPoint>,
    /// Full training objective (mean loss + l2 term) after each epoch, starting at epoch 0.
    pub objective: Vec<f64>,
}

impl RunReport {
    pub fn final_point(&self) -> EvalPoint {
        *self.curve.last().expect("curve always holds epoch 0")
    }
}

/// Oracle-labeled held-out sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSets {
    pub id: Vec<PreferenceItem>,
    pub ood: Vec<PreferenceItem>,
}

impl EvalSets {
    pub fn for_world(world: &SyntheticWorld, size: usize, seed: RngSeed) -> Self {
        Self {
            id: world.held_out(world.id_sampler, size, seed.derive(0)),
            ood: world.held_out(world.ood_sampler, size, seed.derive(1)),
        }
    }
}

struct Batch {
    diffs: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

fn to_batch(data: &[PreferenceItem], dim: usize) -> Result<Batch> {
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
    Ok(Batch { diffs, labels })
}

fn objective_on(weights: &[f64], batch: &Batch, idx: &[usize], loss: LossKind, l2: f64) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; weights.len()];
    let mut total = 0.0;
    for &i in idx {
        let x = &batch.diffs[i];
        let d = dot(weights, x);
        total += loss.eval(batch.labels[i], d);
        let g = loss.grad(batch.labels[i], d);
        for (gj, xj) in grad.iter_mut().zip(x) {
            *gj += g * xj;
        }
    }
    let n = idx.len() as f64;
    let penalty = 0.5 * l2 * dot(weights, weights);
    for (gj, wj) in grad.iter_mut().zip(weights) {
        *gj = *gj / n + l2 * wj;
    }
    (total / n + penalty, grad)
}

/// Mean loss plus `l2/2 |w|^2` over the whole dataset and its gradient.
pub fn batch_objective(weights: &[f64], data: &[PreferenceItem], loss: LossKind, l2: f64) -> Result<(f64, Vec<f64>)> {
    let batch = to_batch(data, weights.len())?;
    let idx: Vec<usize> = (0..data.len()).collect();
    Ok(objective_on(weights, &batch, &idx, loss, l2))
}

/// Fraction of items whose oracle preference (`oracle > 0.5`) agrees with
/// the sign of the predicted reward gap. Items with oracle exactly 0.5 are
/// skipped; a zero predicted gap counts as half correct.
pub fn accuracy(weights: &[f64], items: &[PreferenceItem]) -> f64 {
    let mut correct = 0.0;
    let mut counted = 0usize;
    for it in items {
        let Some(o) = it.oracle else { continue };
        if o == 0.5 {
            continue;
        }
        counted += 1;
        let d = dot(weights, &it.feature_diff());
        if d == 0.0 {
            correct += 0.5;
        } else if (d > 0.0) == (o > 0.5) {
            correct += 1.0;
        }
    }
    if counted == 0 {
        0.5
    } else {
        correct / counted as f64
    }
}

/// Mean cross-entropy against the oracle probabilities.
pub fn oracle_ce(weights: &[f64], items: &[PreferenceItem]) -> f64 {
    let loss = LossKind::CrossEntropy;
    let total: f64 = items
        .iter()
        .filter_map(|it| it.oracle.map(|o| loss.eval(o, dot(weights, &it.feature_diff()))))
        .sum();
    total / items.len().max(1) as f64
}

pub fn evaluate(weights: &[f64], eval: &EvalSets, epoch: usize) -> EvalPoint {
    EvalPoint {
        epoch,
        oracle_ce: oracle_ce(weights, &eval.id),
        id_accuracy: accuracy(weights, &eval.id),
        ood_accuracy: accuracy(weights, &eval.ood),
    }
}

/// Trains a linear reward model on labeled pairs.
pub fn train(data: &[PreferenceItem], cfg: &TrainConfig, eval: &EvalSets) -> Result<(Vec<f64>, RunReport)> {
    cfg.validate()?;
    let dim = data
        .first()
        .map(PreferenceItem::dimension)
        .ok_or(Error::EmptySample)?;
    let batch = to_batch(data, dim)?;
    for it in eval.id.iter().chain(&eval.ood) {
        if it.dimension() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: it.dimension(),
            });
        }
    }

    let mut init_rng = cfg.seed.derive(0).rng();
    let normal = Normal::new(0.0, cfg.init_scale.max(0.0)).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut weights: Vec<f64> = (0..dim).map(|_| normal.sample(&mut init_rng)).collect();
    let mut velocity = vec![0.0; dim];
    let mut shuffle_rng = cfg.seed.derive(1).rng();

    let all: Vec<usize> = (0..data.len()).collect();
    let full_objective = |w: &[f64]| objective_on(w, &batch, &all, cfg.loss, cfg.l2).0;
    let batch_size = if cfg.batch_size == 0 { data.len() } else { cfg.batch_size.min(data.len()) };

    let mut curve = vec![evaluate(&weights, eval, 0)];
    let mut objective = vec![full_objective(&weights)];
    let mut order = all.clone();
    for epoch in 1..=cfg.epochs {
        if batch_size < data.len() {
            order.shuffle(&mut shuffle_rng);
        }
        for chunk in order.chunks(batch_size) {
            let (_, grad) = objective_on(&weights, &batch, chunk, cfg.loss, cfg.l2);
            for ((w, v), g) in weights.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *w += *v;
            }
        }
        let obj = full_objective(&weights);
        if !obj.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonfiniteLoss(epoch));
        }
        objective.push(obj);
        if epoch % cfg.eval_every == 0 || epoch == cfg.epochs {
            curve.push(evaluate(&weights, eval, epoch));
        }
    }
    Ok((weights, RunReport { curve, objective }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub setting: String,
    pub oracle_ce: Stat,
    pub id_accuracy: Stat,
    pub ood_accuracy: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub setting: String,
    pub weights: Vec<f64>,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunRecord>,
}

impl SweepTable {
    pub fn row(&self, setting: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.setting == setting)
    }

    fn from_runs(settings: &[String], runs: Vec<RunRecord>) -> Self {
        let rows = settings
            .iter()
            .map(|s| {
                let finals: Vec<EvalPoint> = runs
                    .iter()
                    .filter(|r| &r.setting == s)
                    .map(|r| r.report.final_point())
                    .collect();
                let pick = |f: fn(&EvalPoint) -> f64| Stat::of(&finals.iter().map(f).collect::<Vec<_>>());
                SweepRow {
                    setting: s.clone(),
                    oracle_ce: pick(|p| p.oracle_ce),
                    id_accuracy: pick(|p| p.id_accuracy),
                    ood_accuracy: pick(|p| p.ood_accuracy),
                }
            })
            .collect();
        Self { rows, runs }
    }
}

// sub-stream tags for per-seed randomness
const DATA_STREAM: u64 = 100;
const EVAL_STREAM: u64 = 200;
const TRAIN_STREAM: u64 = 300;

fn run_grid<F>(settings: &[String], seeds: &[u64], cfg: &TrainConfig, world: &SyntheticWorld, make_data: F) -> Result<SweepTable>
where
    F: Fn(usize, RngSeed) -> Result<Vec<PreferenceItem>> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let jobs: Vec<(u64, usize)> = seeds
        .iter()
        .flat_map(|&s| (0..settings.len()).map(move |k| (s, k)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(seed, k)| {
            let base = RngSeed(seed);
            let data = make_data(k, base.derive(DATA_STREAM))?;
            let eval = EvalSets::for_world(world, cfg.eval_size, base.derive(EVAL_STREAM));
            let run_cfg = TrainConfig {
                seed: base.derive(TRAIN_STREAM),
                ..*cfg
            };
            let (weights, report) = train(&data, &run_cfg, &eval)?;
            Ok(RunRecord {
                seed,
                setting: settings[k].clone(),
                weights,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable::from_runs(settings, runs))
}

/// Trains one model per (seed, feedback system). For a given seed every
/// system sees the same features and label uniforms.
pub fn granularity_sweep(
    world: &SyntheticWorld,
    n: usize,
    systems: &[FeedbackSystem],
    seeds: &[u64],
    cfg: &TrainConfig,
) -> Result<SweepTable> {
    if systems.is_empty() {
        return Err(Error::InvalidConfig("at least one feedback system is required".into()));
    }
    let settings: Vec<String> = systems.iter().map(FeedbackSystem::name).collect();
    run_grid(&settings, seeds, cfg, world, |k, seed| generate_dataset(world, n, &systems[k], seed))
}

/// Label assigned to tied items on the 3-level scale.
pub const TIED_LABEL: f64 = 0.5;

/// A 3-level dataset of exactly `n` items of which `round(ratio * n)` carry
/// the tied label 0.5. Candidate pairs are drawn and labeled with the
/// smallest-interval sampler; tied and untied outcomes fill their quotas
/// in arrival order and surplus candidates are discarded.
pub fn build_tied_dataset(world: &SyntheticWorld, n: usize, ratio: f64, seed: RngSeed) -> Result<Vec<PreferenceItem>> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidConfig(format!("tied ratio {ratio} outside [0, 1]")));
    }
    let three = FeedbackSystem::Ordinal(scale_preset(ScalePreset::ThreeLevel));
    let n_tied = (ratio * n as f64).round() as usize;
    let n_untied = n - n_tied;
    let mut tied = Vec::with_capacity(n_tied);
    let mut untied = Vec::with_capacity(n_untied);
    let mut feat_rng = seed.derive(0).rng();
    let mut label_rng = seed.derive(1).rng();
    let max_candidates = 1000 * n.max(1);
    let mut drawn = 0usize;
    while tied.len() < n_tied || untied.len() < n_untied {
        if drawn >= max_candidates {
            return Err(Error::InvalidConfig(format!(
                "could not fill tied quota {n_tied}/{n} after {drawn} candidates"
            )));
        }
        drawn += 1;
        let mut it = world
            .sample_items(world.id_sampler, 1, &mut feat_rng)
            .pop()
            .expect("one item");
        let u: f64 = rand::Rng::random(&mut label_rng);
        let z = label_with_uniform(&three, it.oracle.unwrap_or(0.5), u)?;
        it.label = Some(z);
        if z == TIED_LABEL {
            if tied.len() < n_tied {
                it.id = format!("tied-{}", tied.len());
                tied.push(it);
            }
        } else if untied.len() < n_untied {
            it.id = format!("untied-{}", untied.len());
            untied.push(it);
        }
    }
    untied.extend(tied);
    Ok(untied)
}

/// Trains one model per (seed, tied ratio) with the total sample size fixed.
pub fn tied_ratio_sweep(
    world: &SyntheticWorld,
    n: usize,
    ratios: &[f64],
    seeds: &[u64],
    cfg: &TrainConfig,
) -> Result<SweepTable> {
    if ratios.is_empty() {
        return Err(Error::InvalidConfig("at least one ratio is required".into()));
    }
    let settings: Vec<String> = ratios.iter().map(|r| r.to_string()).collect();
    run_grid(&settings, seeds, cfg, world, |k, seed| build_tied_dataset(world, n, ratios[k], seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::DEFAULT_TEMPERATURE;

    fn small_world() -> SyntheticWorld {
        SyntheticWorld::new(4, DEFAULT_TEMPERATURE, RngSeed(1)).unwrap()
    }

    #[test]
    fn zero_epochs_keeps_initial_weights() {
        let w = small_world();
        let data = generate_dataset(&w, 50, &FeedbackSystem::Oracle, RngSeed(2)).unwrap();
        let eval = EvalSets::for_world(&w, 100, RngSeed(3));
        let cfg = TrainConfig { epochs: 0, ..TrainConfig::default() };
        let (weights, report) = train(&data, &cfg, &eval).unwrap();
        let mut rng = cfg.seed.derive(0).rng();
        let normal = Normal::new(0.0, cfg.init_scale).unwrap();
        let init: Vec<f64> = (0..4).map(|_| normal.sample(&mut rng)).collect();
        assert_eq!(weights, init);
        assert_eq!(report.curve.len(), 1);
    }

    #[test]
    fn full_batch_objective_is_monotone() {
        let w = small_world();
        let data = generate_dataset(&w, 300, &FeedbackSystem::preset(ScalePreset::Binary), RngSeed(4)).unwrap();
        let eval = EvalSets::for_world(&w, 200, RngSeed(5));
        let (_, report) = train(&data, &TrainConfig { epochs: 100, ..TrainConfig::default() }, &eval).unwrap();
        for pair in report.objective.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let w = SyntheticWorld::new(4, 0.05, RngSeed(1)).unwrap();
        let data = generate_dataset(&w, 50, &FeedbackSystem::preset(ScalePreset::Binary), RngSeed(2)).unwrap();
        let eval = EvalSets::for_world(&w, 10, RngSeed(3));
        let cfg = TrainConfig { loss: LossKind::Squared, learning_rate: 1e300, epochs: 5, ..TrainConfig::default() };
        assert!(matches!(train(&data, &cfg, &eval), Err(Error::NonfiniteLoss(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let w = small_world();
        let mut data = generate_dataset(&w, 5, &FeedbackSystem::Oracle, RngSeed(2)).unwrap();
        data[3].features1.push(0.0);
        data[3].features2.push(0.0);
        let eval = EvalSets::for_world(&w, 10, RngSeed(3));
        assert!(matches!(train(&data, &TrainConfig::default(), &eval), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let w = small_world();
        let data = generate_dataset(&w, 40, &FeedbackSystem::preset(ScalePreset::FiveLevel), RngSeed(6)).unwrap();
        let mut rng = RngSeed(7).rng();
        let normal = Normal::new(0.0, 0.5).unwrap();
        for loss in [LossKind::CrossEntropy, LossKind::Dpo { beta: 0.7 }] {
            for _ in 0..5 {
                let theta: Vec<f64> = (0..4).map(|_| normal.sample(&mut rng)).collect();
                let (_, g) = batch_objective(&theta, &data, loss, 0.01).unwrap();
                for j in 0..4 {
                    let h = 1e-5;
                    let mut p = theta.clone();
                    p[j] += h;
                    let mut m = theta.clone();
                    m[j] -= h;
                    let fd = (batch_objective(&p, &data, loss, 0.01).unwrap().0
                        - batch_objective(&m, &data, loss, 0.01).unwrap().0)
                        / (2.0 * h);
                    let rel = (g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1e-3);
                    assert!(rel < 1e-6, "{loss:?} coord {j}: {} vs {fd}", g[j]);
                }
            }
        }
    }

    #[test]
    fn tied_dataset_quota() {
        let w = small_world();
        let d = build_tied_dataset(&w, 100, 0.25, RngSeed(8)).unwrap();
        assert_eq!(d.len(), 100);
        assert_eq!(d.iter().filter(|it| it.label == Some(0.5)).count(), 25);
        let d0 = build_tied_dataset(&w, 40, 0.0, RngSeed(8)).unwrap();
        assert!(d0.iter().all(|it| it.label == Some(0.0) || it.label == Some(1.0)));
        assert!(build_tied_dataset(&w, 10, 1.5, RngSeed(8)).is_err());
    }

    #[test]
    fn accuracy_conventions() {
        let items = vec![
            PreferenceItem::new("a", vec![1.0], vec![0.0], Some(0.9), None).unwrap(),
            PreferenceItem::new("b", vec![1.0], vec![0.0], Some(0.1), None).unwrap(),
            PreferenceItem::new("c", vec![1.0], vec![0.0], Some(0.5), None).unwrap(),
        ];
        assert_eq!(accuracy(&[1.0], &items), 0.5);
        assert_eq!(accuracy(&[0.0], &items), 0.5);
        assert_eq!(accuracy(&[1.0], &items[..1]), 1.0);
    }

    #[test]
    fn sweep_requires_seeds() {
        let w = small_world();
        let r = granularity_sweep(&w, 10, &[FeedbackSystem::Oracle], &[], &TrainConfig::default());
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }
}
