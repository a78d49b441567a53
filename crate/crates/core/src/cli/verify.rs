//! Property suites behind `ordfb verify`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::complexity::{ordering_report, tiny_instance, RadMode};
use crate::coupling::{build_coupling, to_binary_coupling, validate_vector_coupling};
use crate::error::Error;
use crate::feedback::{random_unbiased_measure, smallest_interval_measure};
use crate::losses::LossKind;
use crate::measure::DiscreteMeasure;
use crate::rng::RngSeed;
use crate::scale::{scale_preset, validate_scale, FeedbackSystem, ScalePreset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VerifySuite {
    Affinity,
    Unbiasedness,
    Coupling,
    Rademacher,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub suite: String,
    pub property: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub verdicts: Vec<Verdict>,
}

/// A coupling between a fine ordinal measure and a coarse scale, as read
/// from a JSON fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingFixture {
    pub fine_levels: Vec<f64>,
    pub fine_mass: Vec<f64>,
    pub coarse_levels: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
}

impl CouplingFixture {
    /// Three-level to binary with the middle row's barycenter moved to 0.7.
    pub fn corrupted() -> Self {
        Self {
            fine_levels: vec![0.0, 0.5, 1.0],
            fine_mass: vec![0.2, 0.3, 0.5],
            coarse_levels: vec![0.0, 1.0],
            beta: vec![vec![1.0, 0.0], vec![0.3, 0.7], vec![0.0, 1.0]],
        }
    }

    pub fn check(&self) -> Result<(), Error> {
        let fine = DiscreteMeasure::new(validate_scale(&self.fine_levels, None)?, self.fine_mass.clone())?;
        build_coupling(fine, validate_scale(&self.coarse_levels, None)?, self.beta.clone()).map(|_| ())
    }
}

fn error_name(e: &Error) -> String {
    format!("{e:?}").split(['{', '(', ' ']).next().unwrap_or("").to_string()
}

struct Suite {
    name: &'static str,
    verdicts: Vec<Verdict>,
}

impl Suite {
    fn new(name: &'static str) -> Self {
        Self { name, verdicts: Vec::new() }
    }

    fn record(&mut self, property: &str, pass: bool, detail: String) {
        self.verdicts.push(Verdict {
            suite: self.name.into(),
            property: property.into(),
            pass,
            detail,
        });
    }
}

pub const PROBES: usize = 13;

fn probes() -> Vec<f64> {
    (0..PROBES).map(|i| -3.0 + 0.5 * i as f64).collect()
}

fn affinity(seed: RngSeed) -> Suite {
    let mut s = Suite::new("affinity");
    let mut rng = seed.derive(1).rng();
    let measures: Vec<DiscreteMeasure> = (0..100)
        .map(|i| random_unbiased_measure(&scale_preset(ScalePreset::ALL[i % 3]), &mut rng).0)
        .collect();
    let p = probes();
    for loss in [LossKind::CrossEntropy, LossKind::hinge(), LossKind::Dpo { beta: 0.5 }] {
        let gap = measures
            .iter()
            .map(|m| crate::losses::verify_affinity(loss, m, &p))
            .fold(0.0, f64::max);
        s.record(&format!("{}_gap_le_1e-12", loss.name()), gap <= 1e-12, format!("max gap {gap:e}"));
    }
    let gap = measures
        .iter()
        .map(|m| crate::losses::verify_affinity(LossKind::Squared, m, &p))
        .fold(0.0, f64::max);
    s.record("squared_control_gap_ge_0.1", gap >= 0.1, format!("max gap {gap}"));
    s
}

fn unbiasedness(seed: RngSeed) -> Suite {
    let mut s = Suite::new("unbiasedness");
    let mut rng = seed.derive(2).rng();
    for p in ScalePreset::ALL {
        let scale = scale_preset(p);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let o: f64 = rand::Rng::random(&mut rng);
            match smallest_interval_measure(&scale, o) {
                Ok(mu) => worst = worst.max((mu.mean() - o).abs()),
                Err(_) => worst = f64::INFINITY,
            }
        }
        s.record(&format!("{}_mean_equals_oracle", p.name()), worst <= 1e-12, format!("max |mean - oracle| {worst:e}"));
    }
    let mu = smallest_interval_measure(&scale_preset(ScalePreset::ThreeLevel), 0.8).expect("valid oracle");
    let ok = mu.mass_at(0) == 0.0 && (mu.mass_at(1) - 0.4).abs() < 1e-15 && (mu.mass_at(2) - 0.6).abs() < 1e-15;
    s.record("three_level_oracle_0.8", ok, format!("masses {:?}", mu.mass()));
    s
}

fn coupling(seed: RngSeed, fixture: Option<&CouplingFixture>) -> Suite {
    let mut s = Suite::new("coupling");
    let mut rng = seed.derive(3).rng();
    for p in ScalePreset::ALL {
        let scale = scale_preset(p);
        let failures = (0..1000)
            .filter(|_| {
                let (mu, _) = random_unbiased_measure(&scale, &mut rng);
                to_binary_coupling(&mu).is_err()
            })
            .count();
        s.record(&format!("{}_to_binary", p.name()), failures == 0, format!("{failures} of 1000 failed"));
    }
    let k = 3;
    let vertices: Vec<Vec<f64>> = (0..k).map(|j| (0..k).map(|c| if c == j { 1.0 } else { 0.0 }).collect()).collect();
    let failures = (0..1000)
        .filter(|_| {
            let raw: Vec<f64> = (0..k).map(|_| -rand::Rng::random::<f64>(&mut rng).max(1e-300).ln()).collect();
            let total: f64 = raw.iter().sum();
            let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
            validate_vector_coupling(std::slice::from_ref(&w), &[1.0], &vertices, std::slice::from_ref(&w), Some(&w)).is_err()
        })
        .count();
    s.record("soft_label_vertex_coupling", failures == 0, format!("{failures} of 1000 failed"));
    match fixture {
        Some(f) => match f.check() {
            Ok(()) => s.record("fixture", true, "fixture is a valid coupling".into()),
            Err(e) => s.record("fixture", false, format!("{}: {e}", error_name(&e))),
        },
        None => {
            let r = CouplingFixture::corrupted().check();
            let ok = matches!(r, Err(Error::BarycenterViolation { .. }));
            let detail = match r {
                Err(e) => format!("rejected with {}", error_name(&e)),
                Ok(()) => "corrupted fixture was accepted".into(),
            };
            s.record("rejects_corrupted_beta", ok, detail);
        }
    }
    s
}

pub const RADEMACHER_REPLICAS: usize = 5000;

fn rademacher(seed: RngSeed) -> Result<Suite, CliError> {
    let mut s = Suite::new("rademacher");
    let (dist, class) = tiny_instance();
    let systems = ["oracle", "five_level", "three_level", "binary"].map(|n| n.parse::<FeedbackSystem>().expect("preset"));
    let rep = ordering_report(&systems, &dist, &class, LossKind::CrossEntropy, RADEMACHER_REPLICAS, RadMode::Exact, seed)?;
    for (a, b) in [("oracle", "three_level"), ("three_level", "binary"), ("oracle", "five_level"), ("five_level", "binary")] {
        let c = rep.comparison(a, b).expect("pair present");
        s.record(&format!("{a}_le_{b}"), c.first_le_second, format!("diff {} stderr {}", c.diff, c.stderr));
    }
    let c = rep.comparison("oracle", "binary").expect("pair present");
    s.record("oracle_lt_binary", c.strictly_less, format!("diff {} stderr {}", c.diff, c.stderr));
    Ok(s)
}

pub fn cmd_verify(suite: VerifySuite, seed: RngSeed, fixture: Option<&Path>) -> Result<VerifyReport, CliError> {
    let fixture = match fixture {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Some(serde_json::from_str::<CouplingFixture>(&text).map_err(|e| CliError::Config {
                field: "fixture".into(),
                reason: e.to_string(),
            })?)
        }
        None => None,
    };
    let all = suite == VerifySuite::All;
    let mut suites = Vec::new();
    if all || suite == VerifySuite::Affinity {
        suites.push(affinity(seed));
    }
    if all || suite == VerifySuite::Unbiasedness {
        suites.push(unbiasedness(seed));
    }
    if all || suite == VerifySuite::Coupling {
        suites.push(coupling(seed, fixture.as_ref()));
    }
    if all || suite == VerifySuite::Rademacher {
        suites.push(rademacher(seed)?);
    }
    let verdicts: Vec<Verdict> = suites.into_iter().flat_map(|s| s.verdicts).collect();
    Ok(VerifyReport {
        pass: verdicts.iter().all(|v| v.pass),
        verdicts,
    })
}
