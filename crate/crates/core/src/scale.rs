//! Ordinal feedback scales: the finite set of label values an annotator may
//! report, ordered and contained in `[0, 1]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when matching a label value against a scale level.
pub const LEVEL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinalScale {
    levels: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl OrdinalScale {
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.levels[0]
    }

    pub fn max(&self) -> f64 {
        self.levels[self.levels.len() - 1]
    }

    /// The one-level scale `{oracle}` used to represent the oracle feedback
    /// system as a degenerate ordinal scale.
    pub fn singleton(oracle: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&oracle) {
            return Err(Error::OutOfRange { value: oracle });
        }
        Ok(Self {
            levels: vec![oracle],
            labels: None,
        })
    }

    /// Index of the level equal to `value` within [`LEVEL_TOLERANCE`].
    pub fn index_of(&self, value: f64) -> Option<usize> {
        self.levels
            .iter()
            .position(|&z| (z - value).abs() <= LEVEL_TOLERANCE)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.index_of(value).is_some()
    }
}

/// Builds a scale from raw levels, checking range, strict monotonicity and
/// label arity.
pub fn validate_scale(levels: &[f64], labels: Option<Vec<String>>) -> Result<OrdinalScale> {
    if levels.len() < 2 {
        return Err(Error::TooFewLevels(levels.len()));
    }
    for (i, &z) in levels.iter().enumerate() {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::OutOfRange { value: z });
        }
        if i > 0 && z <= levels[i - 1] {
            return Err(Error::NonMonotone { index: i, value: z });
        }
    }
    if let Some(l) = &labels {
        if l.len() != levels.len() {
            return Err(Error::LabelMismatch {
                expected: levels.len(),
                got: l.len(),
            });
        }
    }
    Ok(OrdinalScale {
        levels: levels.to_vec(),
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalePreset {
    Binary,
    ThreeLevel,
    FiveLevel,
}

impl ScalePreset {
    pub const ALL: [ScalePreset; 3] = [Self::Binary, Self::ThreeLevel, Self::FiveLevel];

    pub fn name(self) -> &'static str {
        match self {
            Self::Binary => "binary",
            Self::ThreeLevel => "three_level",
            Self::FiveLevel => "five_level",
        }
    }
}

impl FromStr for ScalePreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "2" => Ok(Self::Binary),
            "three_level" | "three" | "3" => Ok(Self::ThreeLevel),
            "five_level" | "five" | "5" => Ok(Self::FiveLevel),
            other => Err(Error::InvalidConfig(format!("unknown scale preset '{other}'"))),
        }
    }
}

/// The named preset scales. Labels run in ascending level order, i.e. from
/// "the first response is worse" (z = 0) to "the first response is better"
/// (z = 1).
pub fn scale_preset(preset: ScalePreset) -> OrdinalScale {
    let (levels, labels): (&[f64], &[&str]) = match preset {
        ScalePreset::Binary => (&[0.0, 1.0], &["worse", "better"]),
        ScalePreset::ThreeLevel => (&[0.0, 0.5, 1.0], &["worse", "same-as", "better"]),
        ScalePreset::FiveLevel => (
            &[0.0, 0.2, 0.5, 0.8, 1.0],
            &["worse", "slightly-worse", "same", "slightly-better", "better"],
        ),
    };
    OrdinalScale {
        levels: levels.to_vec(),
        labels: Some(labels.iter().map(|s| s.to_string()).collect()),
    }
}

/// A feedback system: either the oracle itself (labels equal the oracle
/// probability) or an ordinal scale whose labels are sampled unbiasedly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeedbackSystem {
    Oracle,
    Ordinal(OrdinalScale),
}

impl FeedbackSystem {
    pub fn preset(p: ScalePreset) -> Self {
        Self::Ordinal(scale_preset(p))
    }

    /// Short name used in reports: `oracle`, a preset name, or the level list.
    pub fn name(&self) -> String {
        match self {
            Self::Oracle => "oracle".to_string(),
            Self::Ordinal(scale) => ScalePreset::ALL
                .iter()
                .find(|p| scale_preset(**p).levels == scale.levels)
                .map(|p| p.name().to_string())
                .unwrap_or_else(|| {
                    let parts: Vec<String> = scale.levels.iter().map(|z| z.to_string()).collect();
                    format!("custom[{}]", parts.join(";"))
                }),
        }
    }
}

impl fmt::Display for FeedbackSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeedbackSystem {
    type Err = Error;

    /// Accepts `oracle`, a preset name, or a comma-separated level list.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "oracle" {
            return Ok(Self::Oracle);
        }
        if let Ok(p) = s.parse::<ScalePreset>() {
            return Ok(Self::preset(p));
        }
        let levels = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidConfig(format!("cannot parse scale '{s}'")))?;
        Ok(Self::Ordinal(validate_scale(&levels, None)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_level_validates() {
        let s = validate_scale(&[0.0, 0.5, 1.0], None).unwrap();
        assert_eq!(s.levels(), &[0.0, 0.5, 1.0]);
        assert_eq!(s, OrdinalScale { levels: vec![0.0, 0.5, 1.0], labels: None });
    }

    #[test]
    fn binary_validates() {
        let s = validate_scale(&[0.0, 1.0], None).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn non_monotone_rejected() {
        assert!(matches!(
            validate_scale(&[0.0, 1.0, 0.5], None),
            Err(Error::NonMonotone { index: 2, .. })
        ));
        assert!(matches!(
            validate_scale(&[0.0, 0.0, 1.0], None),
            Err(Error::NonMonotone { .. })
        ));
    }

    #[test]
    fn out_of_range_and_labels() {
        assert!(matches!(
            validate_scale(&[-0.1, 1.0], None),
            Err(Error::OutOfRange { .. })
        ));
        assert!(matches!(
            validate_scale(&[0.0, 1.0], Some(vec!["a".into()])),
            Err(Error::LabelMismatch { expected: 2, got: 1 })
        ));
        assert!(matches!(validate_scale(&[0.3], None), Err(Error::TooFewLevels(1))));
    }

    #[test]
    fn presets() {
        assert_eq!(scale_preset(ScalePreset::FiveLevel).levels(), &[0.0, 0.2, 0.5, 0.8, 1.0]);
        assert_eq!(scale_preset(ScalePreset::Binary).levels(), &[0.0, 1.0]);
        assert_eq!(scale_preset(ScalePreset::ThreeLevel).levels(), &[0.0, 0.5, 1.0]);
        for p in ScalePreset::ALL {
            let s = scale_preset(p);
            assert_eq!(s.labels().unwrap().len(), s.len());
            let again = validate_scale(s.levels(), s.labels().map(|l| l.to_vec())).unwrap();
            assert_eq!(again, s);
        }
    }

    #[test]
    fn level_lookup_uses_tolerance() {
        let s = scale_preset(ScalePreset::FiveLevel);
        assert_eq!(s.index_of(0.2 + 1e-10), Some(1));
        assert_eq!(s.index_of(0.3), None);
    }

    #[test]
    fn feedback_system_parsing() {
        assert_eq!("oracle".parse::<FeedbackSystem>().unwrap(), FeedbackSystem::Oracle);
        assert_eq!(
            "three_level".parse::<FeedbackSystem>().unwrap().name(),
            "three_level"
        );
        let custom: FeedbackSystem = "0,0.25,0.5,0.75,1".parse().unwrap();
        assert_eq!(custom.name(), "custom[0;0.25;0.5;0.75;1]");
        assert!("0,2".parse::<FeedbackSystem>().is_err());
    }
}
