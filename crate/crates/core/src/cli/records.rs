//! JSONL preference records and the `label` command.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::losses::sigmoid;
use crate::rng::RngSeed;
use crate::scale::FeedbackSystem;
use crate::world::label_with_uniform;

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceRecord {
    pub id: String,
    pub features_1: Vec<f64>,
    pub features_2: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<f64>,
}

impl PreferenceRecord {
    /// The record's oracle: given directly, or `sigmoid((score_1 - score_2) / T)`.
    /// `None` when the record carries neither.
    pub fn resolve_oracle(&self, temperature: f64) -> Option<f64> {
        match (self.oracle, self.score_1, self.score_2) {
            (Some(o), _, _) => Some(o),
            (None, Some(s1), Some(s2)) => Some(sigmoid((s1 - s2) / temperature)),
            _ => None,
        }
    }

    fn check(&self, line: usize, width: &mut Option<usize>) -> Result<(), CliError> {
        let bad = |reason: String| Err(CliError::MalformedRecord { line, reason });
        if self.features_1.len() != self.features_2.len() {
            return bad(format!(
                "features_1 has {} entries but features_2 has {}",
                self.features_1.len(),
                self.features_2.len()
            ));
        }
        match width {
            Some(w) if *w != self.features_1.len() => {
                return bad(format!("expected {w} features, found {}", self.features_1.len()));
            }
            None => *width = Some(self.features_1.len()),
            _ => {}
        }
        let numbers = self
            .features_1
            .iter()
            .chain(&self.features_2)
            .chain(self.score_1.iter())
            .chain(self.score_2.iter())
            .chain(self.oracle.iter())
            .chain(self.label.iter());
        if numbers.into_iter().any(|x| !x.is_finite()) {
            return bad("non-finite number".into());
        }
        match (self.oracle, self.score_1, self.score_2) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => bad("oracle and scores are mutually exclusive".into()),
            (None, Some(_), None) | (None, None, Some(_)) => bad("score_1 and score_2 must be given together".into()),
            (Some(o), None, None) if !(0.0..=1.0).contains(&o) => bad(format!("oracle {o} outside [0, 1]")),
            _ => Ok(()),
        }
    }
}

/// Reads and validates a JSONL file. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn read_records(path: &Path) -> Result<Vec<PreferenceRecord>, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    let mut width = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| CliError::io(path, e))?;
        if text.trim().is_empty() {
            continue;
        }
        let rec: PreferenceRecord = serde_json::from_str(&text).map_err(|e| CliError::MalformedRecord {
            line: line_no,
            reason: e.to_string(),
        })?;
        rec.check(line_no, &mut width)?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[PreferenceRecord]) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| CliError::Io(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub count: usize,
    pub system: String,
    /// Label value (or decile bucket in oracle mode) to count.
    pub histogram: BTreeMap<String, usize>,
}

/// Labels every record under `system`. Record `i` (0-based, blank lines
/// excluded) draws its uniform from `seed.derive(i)`.
pub fn label_records(
    records: &mut [PreferenceRecord],
    system: &FeedbackSystem,
    temperature: f64,
    seed: RngSeed,
) -> Result<LabelSummary, CliError> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(CliError::Config {
            field: "temperature".into(),
            reason: format!("must be positive, got {temperature}"),
        });
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, rec) in records.iter_mut().enumerate() {
        let oracle = rec.resolve_oracle(temperature).ok_or(CliError::MissingOracle(i + 1))?;
        let u: f64 = seed.derive(i as u64).rng().random();
        let z = label_with_uniform(system, oracle, u)?;
        rec.label = Some(z);
        let bucket = match system {
            FeedbackSystem::Oracle => ((z * 10.0).floor() as usize).min(9),
            FeedbackSystem::Ordinal(scale) => scale.index_of(z).expect("sampled label is a level"),
        };
        *counts.entry(bucket).or_default() += 1;
    }
    let histogram = counts
        .into_iter()
        .map(|(b, c)| {
            let key = match system {
                FeedbackSystem::Oracle => format!("[{:.1}, {:.1})", b as f64 / 10.0, (b + 1) as f64 / 10.0),
                FeedbackSystem::Ordinal(scale) => scale.levels()[b].to_string(),
            };
            (key, c)
        })
        .collect();
    Ok(LabelSummary {
        count: records.len(),
        system: system.name(),
        histogram,
    })
}

/// Reads `input`, labels it and writes `output`.
pub fn cmd_label(
    input: &Path,
    output: &Path,
    system: &FeedbackSystem,
    temperature: f64,
    seed: RngSeed,
) -> Result<LabelSummary, CliError> {
    let mut records = read_records(input)?;
    let summary = label_records(&mut records, system, temperature, seed)?;
    write_records(output, &records)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale::ScalePreset;

    fn rec(oracle: Option<f64>, scores: Option<(f64, f64)>) -> PreferenceRecord {
        PreferenceRecord {
            id: "r".into(),
            features_1: vec![0.1, 0.2],
            features_2: vec![0.3, -0.4],
            score_1: scores.map(|s| s.0),
            score_2: scores.map(|s| s.1),
            oracle,
            label: None,
        }
    }

    #[test]
    fn equal_scores_give_half() {
        let mut rs = vec![rec(None, Some((1.3, 1.3)))];
        let s = label_records(&mut rs, &FeedbackSystem::preset(ScalePreset::ThreeLevel), 20.0 / 3.0, RngSeed(0)).unwrap();
        assert_eq!(rs[0].label, Some(0.5));
        assert_eq!(s.histogram.get("0.5"), Some(&1));
    }

    #[test]
    fn exclusivity() {
        let mut w = None;
        assert!(matches!(
            rec(Some(0.4), Some((1.0, 0.0))).check(3, &mut w),
            Err(CliError::MalformedRecord { line: 3, .. })
        ));
        let mut half = rec(None, Some((1.0, 0.0)));
        half.score_2 = None;
        assert!(half.check(1, &mut None).is_err());
        let mut rs = vec![rec(None, None)];
        let r = label_records(&mut rs, &FeedbackSystem::Oracle, 1.0, RngSeed(0));
        assert!(matches!(r, Err(CliError::MissingOracle(1))));
    }

    #[test]
    fn ragged_file_is_rejected() {
        let mut w = None;
        rec(Some(0.2), None).check(1, &mut w).unwrap();
        let mut wide = rec(Some(0.2), None);
        wide.features_1.push(1.0);
        wide.features_2.push(1.0);
        assert!(wide.check(2, &mut w).is_err());
    }
}
