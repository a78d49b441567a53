//! Acceptance suite: one numbered check per criterion, run serially so the
//! wall-clock budgets are measured without interference. Prints one
//! PASS/FAIL line per criterion and exits nonzero if any fails.

use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use tempfile::tempdir;

use ordinal_feedback::cli::{cmd_experiment, CouplingFixture};
use ordinal_feedback::complexity::{expected_rademacher_crn, ordering_report, tiny_instance, RadMode};
use ordinal_feedback::coupling::{to_binary_coupling, validate_vector_coupling};
use ordinal_feedback::feedback::{decompose_unbiased, label_from_uniform, random_unbiased_measure, smallest_interval_measure};
use ordinal_feedback::losses::{expected_loss, verify_affinity, LossKind};
use ordinal_feedback::soft_label::{two_class_instance, MemberFit, Teacher};
use ordinal_feedback::trainer::{batch_objective, granularity_sweep, tied_ratio_sweep, TrainConfig};
use ordinal_feedback::world::{generate_dataset, SyntheticWorld, DEFAULT_TEMPERATURE};
use ordinal_feedback::{scale_preset, Error, FeedbackSystem, RngSeed, ScalePreset};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn systems() -> Vec<FeedbackSystem> {
    ["oracle", "five_level", "three_level", "binary"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
}

const PROBES: [f64; 13] = [-6.0, -3.0, -2.0, -1.0, -0.5, -0.1, 0.0, 0.1, 0.5, 1.0, 2.0, 3.0, 6.0];

fn affinity() -> Outcome {
    let mut rng = RngSeed(101).rng();
    let measures: Vec<_> = (0..100)
        .map(|i| random_unbiased_measure(&scale_preset(ScalePreset::ALL[i % 3]), &mut rng).0)
        .collect();
    let mut worst = Vec::new();
    for loss in [LossKind::CrossEntropy, LossKind::hinge(), LossKind::Dpo { beta: 0.5 }] {
        let g = measures.iter().map(|m| verify_affinity(loss, m, &PROBES)).fold(0.0, f64::max);
        worst.push((loss.name(), g));
    }
    let sq = measures.iter().map(|m| verify_affinity(LossKind::Squared, m, &PROBES)).fold(0.0, f64::max);
    let pass = worst.iter().all(|(_, g)| *g <= 1e-12) && sq >= 0.1;
    outcome(pass, format!("max gaps {worst:?}; squared control {sq:.4}"))
}

fn unbiasedness() -> Outcome {
    let mut rng = RngSeed(102).rng();
    let mut worst = 0.0f64;
    for p in ScalePreset::ALL {
        let s = scale_preset(p);
        for _ in 0..1000 {
            let o: f64 = rng.random();
            let mu = smallest_interval_measure(&s, o).unwrap();
            worst = worst.max((mu.mean() - o).abs());
        }
    }
    let mu = smallest_interval_measure(&scale_preset(ScalePreset::ThreeLevel), 0.8).unwrap();
    let example = mu.mass_at(0) == 0.0 && (mu.mass_at(1) - 0.4).abs() <= 1e-15 && (mu.mass_at(2) - 0.6).abs() <= 1e-15;
    outcome(worst <= 1e-12 && example, format!("max |mean - oracle| {worst:e}; oracle 0.8 masses {:?}", mu.mass()))
}

fn decomposition() -> Outcome {
    let five = scale_preset(ScalePreset::FiveLevel);
    let mut rng = RngSeed(103).rng();
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let (mu, o) = random_unbiased_measure(&five, &mut rng);
        let d = decompose_unbiased(&mu, o).unwrap();
        let back = d.reconstruct(&five).unwrap();
        worst = worst.max(back.max_abs_diff(&mu));
        if d.components.iter().any(|(_, w)| *w < 0.0) {
            return outcome(false, "negative mixture weight");
        }
    }
    outcome(worst <= 1e-9, format!("max per-level reconstruction error {worst:e}"))
}

/// Three-level sampling exactly as the reference pseudocode states it.
fn literal_three_level(z_oracle: f64, u: f64) -> f64 {
    let bernoulli = |p: f64| if u < p { 1.0 } else { 0.0 };
    if z_oracle < 0.5 {
        let y = bernoulli(z_oracle / 0.5);
        0.5 * y
    } else if z_oracle > 0.5 {
        let y = bernoulli((z_oracle - 0.5) / 0.5);
        0.5 * y + 0.5
    } else {
        0.5
    }
}

fn algorithm_equivalence() -> Outcome {
    let three = scale_preset(ScalePreset::ThreeLevel);
    let mut rng = RngSeed(104).rng();
    let mut mismatches = 0usize;
    for i in 0..1_000_000u32 {
        let o: f64 = match i % 97 {
            0 => 0.0,
            1 => 0.5,
            2 => 1.0,
            _ => rng.random(),
        };
        let u: f64 = rng.random();
        if label_from_uniform(&three, o, u).unwrap().to_bits() != literal_three_level(o, u).to_bits() {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches in 10^6 labels"))
}

fn coupling_validity() -> Outcome {
    let mut rng = RngSeed(105).rng();
    let mut failures = 0;
    for p in ScalePreset::ALL {
        let s = scale_preset(p);
        for _ in 0..1000 {
            let (mu, _) = random_unbiased_measure(&s, &mut rng);
            let c = to_binary_coupling(&mu);
            match c {
                Ok(spec) => {
                    let means = spec.conditional_means();
                    if means.iter().zip(s.levels()).any(|(m, z)| (m - z).abs() > 1e-9) {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    let k = 3;
    let vertices: Vec<Vec<f64>> = (0..k).map(|j| (0..k).map(|c| if c == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut soft_failures = 0;
    for _ in 0..1000 {
        let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let t: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|x| x / t).collect();
        if validate_vector_coupling(std::slice::from_ref(&w), &[1.0], &vertices, std::slice::from_ref(&w), Some(&w)).is_err() {
            soft_failures += 1;
        }
    }
    let corrupted = CouplingFixture::corrupted().check();
    let named = matches!(corrupted, Err(Error::BarycenterViolation { .. }));
    outcome(
        failures == 0 && soft_failures == 0 && named,
        format!("binary failures {failures}/3000, soft-label failures {soft_failures}/1000, corrupted fixture -> {corrupted:?}"),
    )
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn rademacher_ordering() -> Outcome {
    let (dist, class) = tiny_instance();
    let sys = systems();
    let seed = RngSeed(106);
    let rep = ordering_report(&sys, &dist, &class, LossKind::CrossEntropy, 5000, RadMode::Exact, seed).unwrap();
    let le = |a: &str, b: &str| rep.comparison(a, b).unwrap().first_le_second;
    let ordered = le("oracle", "three_level") && le("three_level", "binary") && le("oracle", "five_level") && le("five_level", "binary");
    let strict = rep.comparison("oracle", "binary").unwrap();

    // Brute force on replica 0: own loss, own sign enumeration.
    let crn = expected_rademacher_crn(&dist, &sys, &class, LossKind::CrossEntropy, 1, RadMode::Exact, seed).unwrap();
    let ordinal_feedback::complexity::HypothesisClass::FiniteSet(hyps) = &class else { unreachable!() };
    let mut worst = 0.0f64;
    for (s, system) in sys.iter().enumerate() {
        let data = generate_dataset(&dist.world, dist.n, system, seed.derive2(0, 0)).unwrap();
        let n = data.len();
        let mut total = 0.0;
        for mask in 0..(1u32 << n) {
            let mut best = f64::NEG_INFINITY;
            for h in hyps {
                let mut acc = 0.0;
                for (i, it) in data.iter().enumerate() {
                    let d: f64 = h.iter().zip(it.features1.iter().zip(&it.features2)).map(|(w, (a, b))| w * (a - b)).sum();
                    let z = it.label.unwrap();
                    let l = -z * sigmoid(d).ln() - (1.0 - z) * sigmoid(-d).ln();
                    acc += if mask >> i & 1 == 1 { l } else { -l };
                }
                best = best.max(acc);
            }
            total += best;
        }
        let brute = total / (1u64 << n) as f64 / n as f64;
        worst = worst.max((brute - crn.per_replica[0][s]).abs());
    }
    let values: Vec<String> = rep.rows.iter().map(|r| format!("{}={:.5}±{:.5}", r.system, r.estimate.value, r.estimate.stderr)).collect();
    outcome(
        ordered && strict.strictly_less && worst <= 1e-12,
        format!(
            "{}; binary-oracle {:.5} (se {:.5}); brute-force max diff {worst:e}",
            values.join(" "),
            strict.diff,
            strict.stderr
        ),
    )
}

fn population_equivalence() -> Outcome {
    let mut rng = RngSeed(107).rng();
    let three = scale_preset(ScalePreset::ThreeLevel);
    let five = scale_preset(ScalePreset::FiveLevel);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let o: f64 = rng.random();
        let d: f64 = 8.0 * rng.random::<f64>() - 4.0;
        let a = smallest_interval_measure(&three, o).unwrap();
        let b = smallest_interval_measure(&five, o).unwrap();
        worst = worst.max((expected_loss(LossKind::CrossEntropy, &a, d) - expected_loss(LossKind::CrossEntropy, &b, d)).abs());
    }
    outcome(worst <= 1e-12, format!("max |E3 - E5| {worst:e}"))
}

fn tied_collapse() -> Outcome {
    let world = SyntheticWorld::new(16, DEFAULT_TEMPERATURE, RngSeed(108)).unwrap();
    let cfg = TrainConfig { l2: 1e-2, ..TrainConfig::default() };
    let table = tied_ratio_sweep(&world, 512, &[1.0], &[1, 2, 3, 4, 5], &cfg).unwrap();
    let ln2 = std::f64::consts::LN_2;
    let mut worst_ce = 0.0f64;
    let mut worst_norm = 0.0f64;
    let mut accs = Vec::new();
    for run in &table.runs {
        let f = run.report.final_point();
        worst_ce = worst_ce.max((f.oracle_ce - ln2).abs());
        worst_norm = worst_norm.max(run.weights.iter().map(|w| w * w).sum::<f64>().sqrt());
        accs.push(f.id_accuracy);
    }
    outcome(
        table.runs.len() == 5 && worst_ce <= 1e-3 && worst_norm <= 1e-3,
        format!("max |CE - ln 2| {worst_ce:e}, max |w| {worst_norm:e}, id acc {accs:.3?}"),
    )
}

fn granularity_direction() -> Outcome {
    let world = SyntheticWorld::new(16, DEFAULT_TEMPERATURE, RngSeed(109)).unwrap();
    let seeds: Vec<u64> = (1..=20).collect();
    let table = granularity_sweep(&world, 500, &systems(), &seeds, &TrainConfig::default()).unwrap();
    let m = |s: &str| table.row(s).unwrap().oracle_ce;
    let (o, f, t, b) = (m("oracle"), m("five_level"), m("three_level"), m("binary"));
    let pooled_se = (b.std * b.std / 20.0 + o.std * o.std / 20.0).sqrt();
    let gated = o.mean <= f.mean && o.mean <= t.mean && f.mean <= b.mean && t.mean <= b.mean && b.mean - o.mean > pooled_se;
    outcome(
        gated,
        format!(
            "oracle {:.5}±{:.5}, five {:.5}±{:.5}, three {:.5}±{:.5}, binary {:.5}±{:.5}; binary-oracle {:.5} vs pooled se {:.5}; five<=three (not gated): {}",
            o.mean, o.std, f.mean, f.std, t.mean, t.std, b.mean, b.std, b.mean - o.mean, pooled_se, f.mean <= t.mean
        ),
    )
}

fn tied_ratio_direction() -> Outcome {
    let world = SyntheticWorld::new(16, DEFAULT_TEMPERATURE, RngSeed(110)).unwrap();
    let seeds: Vec<u64> = (1..=20).collect();
    let table = tied_ratio_sweep(&world, 512, &[0.0, 0.25], &seeds, &TrainConfig::default()).unwrap();
    let r0 = table.rows[0].id_accuracy;
    let r25 = table.rows[1].id_accuracy;
    let pooled = ((r0.std * r0.std + r25.std * r25.std) / 2.0).sqrt();
    outcome(
        r25.mean >= r0.mean - pooled,
        format!(
            "id acc ratio 0: {:.4}±{:.4}, ratio 0.25: {:.4}±{:.4}, pooled std {pooled:.4}; oracle CE (not gated) {:.4} vs {:.4}",
            r0.mean,
            r0.std,
            r25.mean,
            r25.std,
            table.rows[0].oracle_ce.mean,
            table.rows[1].oracle_ce.mean
        ),
    )
}

fn gradient_checks() -> Outcome {
    let world = SyntheticWorld::new(6, DEFAULT_TEMPERATURE, RngSeed(111)).unwrap();
    let data = generate_dataset(&world, 64, &"five_level".parse().unwrap(), RngSeed(112)).unwrap();
    let mut rng = RngSeed(113).rng();
    let mut worst = 0.0f64;
    for loss in [LossKind::CrossEntropy, LossKind::Dpo { beta: 0.3 }] {
        for _ in 0..10 {
            let theta: Vec<f64> = (0..6).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            let (_, g) = batch_objective(&theta, &data, loss, 1e-3).unwrap();
            for j in 0..6 {
                let h = 1e-5;
                let mut p = theta.clone();
                p[j] += h;
                let mut q = theta.clone();
                q[j] -= h;
                let fd = (batch_objective(&p, &data, loss, 1e-3).unwrap().0 - batch_objective(&q, &data, loss, 1e-3).unwrap().0) / (2.0 * h);
                worst = worst.max((g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1e-8));
            }
        }
    }
    outcome(worst <= 1e-6, format!("max relative error {worst:e}"))
}

fn soft_label_variance() -> Outcome {
    let (world, class) = two_class_instance();
    let teacher = Teacher::Ensemble {
        members: 32,
        fit: MemberFit::default(),
        pool_size: 12,
    };
    let r = ordinal_feedback::soft_label::variance_reduction_report(&world, &teacher, &class, 6, 2000, RngSeed(114)).unwrap();
    let rv = r.reduced_variance;
    let pass = r.assumption2.pass && rv.nonnegative() && rv.diff > 0.0;
    outcome(
        pass,
        format!(
            "rad y {:.5}, teacher {:.5}, sampled {:.5}, oracle {:.5}; reduced variance {:.5} (se {:.5}); residual {:?} (se {:?}); sampled>=teacher {}, y>=oracle {}, bias {:.5} (se {:.5}), HE witnesses {}",
            r.rad_y.value,
            r.rad_teacher.value,
            r.rad_sampled_teacher.value,
            r.rad_oracle.value,
            rv.diff,
            rv.stderr,
            r.assumption2.mean_residual,
            r.assumption2.stderr,
            r.sampling_gap.nonnegative(),
            r.oracle_gap.nonnegative(),
            r.bias.diff,
            r.bias.stderr,
            r.he_witnesses_valid
        ),
    )
}

fn determinism() -> Outcome {
    let config = "sweep = \"granularity\"\nseeds = [3, 4, 5]\nn = 120\noutput_dir = \"out\"\n\n[world]\ndimension = 8\nseed = 9\n\n[train]\nepochs = 40\neval_every = 5\neval_size = 300\n";
    let mut csvs = Vec::new();
    let mut dirs = Vec::new();
    for _ in 0..2 {
        let dir = tempdir().unwrap();
        let path = dir.path().join("gran.toml");
        std::fs::write(&path, config).unwrap();
        let out = cmd_experiment(&path).unwrap();
        csvs.push(std::fs::read(&out.csv).unwrap());
        dirs.push(dir);
    }
    outcome(csvs[0] == csvs[1] && !csvs[0].is_empty(), format!("{} bytes, identical: {}", csvs[0].len(), csvs[0] == csvs[1]))
}

fn main() {
    let criteria: Vec<(u32, &str, Option<Duration>, fn() -> Outcome)> = vec![
        (1, "affinity identity", Some(Duration::from_secs(1)), affinity),
        (2, "unbiasedness", Some(Duration::from_secs(1)), unbiasedness),
        (3, "decomposition", Some(Duration::from_secs(5)), decomposition),
        (4, "three-level sampler equivalence", Some(Duration::from_secs(5)), algorithm_equivalence),
        (5, "coupling validity", Some(Duration::from_secs(2)), coupling_validity),
        (6, "rademacher ordering", Some(Duration::from_secs(60)), rademacher_ordering),
        (7, "population-loss equivalence", Some(Duration::from_secs(1)), population_equivalence),
        (8, "tied collapse", Some(Duration::from_secs(30)), tied_collapse),
        (9, "granularity direction", Some(Duration::from_secs(300)), granularity_direction),
        (10, "tied-ratio benefit direction", Some(Duration::from_secs(300)), tied_ratio_direction),
        (11, "gradient checks", Some(Duration::from_secs(1)), gradient_checks),
        (12, "soft-label variance reduction", Some(Duration::from_secs(120)), soft_label_variance),
        (13, "determinism", None, determinism),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check));
        let elapsed = start.elapsed();
        let (mut pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("panicked: {:?}", e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())))),
        };
        let timing = match budget {
            Some(b) if elapsed > b => {
                pass = false;
                format!("{:.2}s exceeds {}s budget", elapsed.as_secs_f64(), b.as_secs())
            }
            Some(b) => format!("{:.2}s of {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        println!("criterion {id:>2} {}: {name} [{timing}] {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
