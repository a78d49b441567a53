//! TOML-configured experiments writing a CSV of per-seed results and a
//! JSON summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::complexity::{ordering_report, tiny_instance, OrderingReport, RadMode};
use crate::losses::LossKind;
use crate::rng::RngSeed;
use crate::scale::FeedbackSystem;
use crate::soft_label::{two_class_instance, MemberFit, Teacher, VarianceReport, DEFAULT_ENSEMBLE_SIZE};
use crate::trainer::{granularity_sweep, tied_ratio_sweep, Stat, SweepRow, SweepTable, TrainConfig};
use crate::world::{SyntheticWorld, DEFAULT_DIMENSION, DEFAULT_TEMPERATURE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Granularity,
    TiedRatio,
    Rademacher,
    Softlabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub dimension: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            temperature: DEFAULT_TEMPERATURE,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RademacherConfig {
    pub n_datasets: usize,
    pub loss: LossKind,
}

impl Default for RademacherConfig {
    fn default() -> Self {
        Self {
            n_datasets: 5000,
            loss: LossKind::CrossEntropy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SoftLabelConfig {
    pub n: usize,
    pub n_datasets: usize,
    pub members: usize,
    pub pool_size: usize,
    pub fit: MemberFit,
}

impl Default for SoftLabelConfig {
    fn default() -> Self {
        Self {
            n: 6,
            n_datasets: 500,
            members: DEFAULT_ENSEMBLE_SIZE,
            pool_size: 12,
            fit: MemberFit::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sweep: SweepKind,
    pub seeds: Vec<u64>,
    /// Resolved against the config file's directory when relative.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub world: WorldConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_systems")]
    pub systems: Vec<String>,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default)]
    pub rademacher: RademacherConfig,
    #[serde(default)]
    pub softlabel: SoftLabelConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_n() -> usize {
    500
}

fn default_systems() -> Vec<String> {
    ["oracle", "five_level", "three_level", "binary"].map(String::from).to_vec()
}

fn default_ratios() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}

fn config_err(field: &str, reason: impl ToString) -> CliError {
    CliError::Config {
        field: field.into(),
        reason: reason.to_string(),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("config")
                .to_string();
            config_err(&field, e.message())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "at least one seed is required"));
        }
        if self.n == 0 {
            return Err(config_err("n", "must be at least 1"));
        }
        if self.world.dimension == 0 {
            return Err(config_err("world.dimension", "must be at least 1"));
        }
        if !(self.world.temperature > 0.0 && self.world.temperature.is_finite()) {
            return Err(config_err("world.temperature", "must be positive"));
        }
        self.train.validate().map_err(|e| config_err("train", e))?;
        self.feedback_systems()?;
        if self.systems.is_empty() {
            return Err(config_err("systems", "at least one feedback system is required"));
        }
        if self.sweep == SweepKind::TiedRatio
            && (self.ratios.is_empty() || self.ratios.iter().any(|r| !(0.0..=1.0).contains(r)))
        {
            return Err(config_err("ratios", "need at least one ratio, each in [0, 1]"));
        }
        Ok(())
    }

    pub fn feedback_systems(&self) -> Result<Vec<FeedbackSystem>, CliError> {
        self.systems
            .iter()
            .map(|s| s.parse().map_err(|e| config_err("systems", e)))
            .collect()
    }

    fn world(&self) -> Result<SyntheticWorld, CliError> {
        Ok(SyntheticWorld::new(self.world.dimension, self.world.temperature, RngSeed(self.world.seed))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutputs {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

#[derive(Serialize)]
struct TrainingSummary<'a> {
    sweep: SweepKind,
    seeds: &'a [u64],
    n: usize,
    rows: &'a [SweepRow],
}

#[derive(Serialize)]
struct RademacherSummary<'a> {
    sweep: SweepKind,
    seeds: &'a [u64],
    systems: Vec<(String, Stat)>,
    reports: Vec<(u64, OrderingReport)>,
}

#[derive(Serialize)]
struct SoftLabelSummary<'a> {
    sweep: SweepKind,
    seeds: &'a [u64],
    reports: Vec<(u64, VarianceReport)>,
}

fn training_csv(table: &SweepTable) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "scale_or_ratio", "epoch", "oracle_ce", "id_acc", "ood_acc"])
        .map_err(|e| CliError::Io(e.to_string()))?;
    for run in &table.runs {
        for p in &run.report.curve {
            w.write_record([
                run.seed.to_string(),
                run.setting.clone(),
                p.epoch.to_string(),
                p.oracle_ce.to_string(),
                p.id_accuracy.to_string(),
                p.ood_accuracy.to_string(),
            ])
            .map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))
}

/// Runs a parsed config and returns `(csv, summary_json)` contents.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(String, String), CliError> {
    cfg.validate()?;
    match cfg.sweep {
        SweepKind::Granularity => {
            let table = granularity_sweep(&cfg.world()?, cfg.n, &cfg.feedback_systems()?, &cfg.seeds, &cfg.train)?;
            let summary = TrainingSummary { sweep: cfg.sweep, seeds: &cfg.seeds, n: cfg.n, rows: &table.rows };
            Ok((training_csv(&table)?, json(&summary)?))
        }
        SweepKind::TiedRatio => {
            let table = tied_ratio_sweep(&cfg.world()?, cfg.n, &cfg.ratios, &cfg.seeds, &cfg.train)?;
            let summary = TrainingSummary { sweep: cfg.sweep, seeds: &cfg.seeds, n: cfg.n, rows: &table.rows };
            Ok((training_csv(&table)?, json(&summary)?))
        }
        SweepKind::Rademacher => {
            let (dist, class) = tiny_instance();
            let systems = cfg.feedback_systems()?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["seed", "system", "rademacher", "stderr"])
                .map_err(|e| CliError::Io(e.to_string()))?;
            let mut reports = Vec::new();
            for &seed in &cfg.seeds {
                let rep = ordering_report(
                    &systems,
                    &dist,
                    &class,
                    cfg.rademacher.loss,
                    cfg.rademacher.n_datasets,
                    RadMode::Exact,
                    RngSeed(seed),
                )?;
                for row in &rep.rows {
                    w.write_record([
                        seed.to_string(),
                        row.system.clone(),
                        row.estimate.value.to_string(),
                        row.estimate.stderr.to_string(),
                    ])
                    .map_err(|e| CliError::Io(e.to_string()))?;
                }
                reports.push((seed, rep));
            }
            let per_system = (0..systems.len())
                .map(|s| {
                    let vals: Vec<f64> = reports.iter().map(|(_, r)| r.rows[s].estimate.value).collect();
                    (reports[0].1.rows[s].system.clone(), Stat::of(&vals))
                })
                .collect();
            let summary = RademacherSummary {
                sweep: cfg.sweep,
                seeds: &cfg.seeds,
                systems: per_system,
                reports,
            };
            Ok((finish(w)?, json(&summary)?))
        }
        SweepKind::Softlabel => {
            let (world, class) = two_class_instance();
            let sl = &cfg.softlabel;
            let teacher = Teacher::Ensemble {
                members: sl.members,
                fit: sl.fit,
                pool_size: sl.pool_size,
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["seed", "paradigm", "rademacher", "stderr"])
                .map_err(|e| CliError::Io(e.to_string()))?;
            let mut reports = Vec::new();
            for &seed in &cfg.seeds {
                let rep = crate::soft_label::variance_reduction_report(
                    &world,
                    &teacher,
                    &class,
                    sl.n,
                    sl.n_datasets,
                    RngSeed(seed),
                )?;
                for (name, est) in [
                    ("original", rep.rad_y),
                    ("distill", rep.rad_teacher),
                    ("sample_from_teacher", rep.rad_sampled_teacher),
                    ("oracle", rep.rad_oracle),
                ] {
                    w.write_record([seed.to_string(), name.to_string(), est.value.to_string(), est.stderr.to_string()])
                        .map_err(|e| CliError::Io(e.to_string()))?;
                }
                reports.push((seed, rep));
            }
            let summary = SoftLabelSummary { sweep: cfg.sweep, seeds: &cfg.seeds, reports };
            Ok((finish(w)?, json(&summary)?))
        }
    }
}

/// Reads the config at `path`, runs it and writes `<stem>.csv` and
/// `<stem>.summary.json` into the configured output directory.
pub fn cmd_experiment(path: &Path) -> Result<ExperimentOutputs, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let dir = if cfg.output_dir.is_absolute() {
        cfg.output_dir.clone()
    } else {
        path.parent().unwrap_or(Path::new(".")).join(&cfg.output_dir)
    };
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
    let (csv_text, summary) = run_experiment(&cfg)?;
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let outputs = ExperimentOutputs {
        csv: dir.join(format!("{stem}.csv")),
        summary: dir.join(format!("{stem}.summary.json")),
    };
    fs::write(&outputs.csv, csv_text).map_err(|e| CliError::io(&outputs.csv, e))?;
    fs::write(&outputs.summary, summary + "\n").map_err(|e| CliError::io(&outputs.summary, e))?;
    Ok(outputs)
}
