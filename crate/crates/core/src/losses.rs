//! Losses that are affine in the preference label.
//!
//! All losses here are written as functions of a label `z` in `[0, 1]` and a
//! scalar prediction. For reward models the prediction is the reward
//! difference `r1 - r2`; for DPO it is the difference of policy/reference
//! log-ratios, scaled by `beta` before entering the cross-entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const LOG_CLAMP_EPS: f64 = 1e-12;

/// Default hinge margin.
pub const DEFAULT_MARGIN: f64 = 2.0;

/// Largest double strictly below one.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, branching on sign so that neither branch overflows.
/// Never returns exactly 0 or 1.
pub fn sigmoid(x: f64) -> f64 {
    let s = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, ONE_MINUS_ULP)
}

fn clamped_ln(p: f64) -> f64 {
    p.clamp(LOG_CLAMP_EPS, 1.0 - LOG_CLAMP_EPS).ln()
}

fn check_label(z: f64) -> Result<()> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(Error::LabelOutOfRange(z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardPairScore {
    pub r1: f64,
    pub r2: f64,
}

impl RewardPairScore {
    pub fn new(r1: f64, r2: f64) -> Self {
        Self { r1, r2 }
    }

    pub fn diff(&self) -> f64 {
        self.r1 - self.r2
    }

    /// Bradley-Terry probability that response 1 is preferred.
    pub fn preference_probability(&self) -> f64 {
        sigmoid(self.diff())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpoPairScore {
    pub lp1_policy: f64,
    pub lp1_ref: f64,
    pub lp2_policy: f64,
    pub lp2_ref: f64,
    pub beta: f64,
}

impl DpoPairScore {
    /// `beta * [(lp1_policy - lp1_ref) - (lp2_policy - lp2_ref)]`
    pub fn implied_reward_diff(&self) -> f64 {
        self.beta * ((self.lp1_policy - self.lp1_ref) - (self.lp2_policy - self.lp2_ref))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HingeConfig {
    pub margin: f64,
}

impl HingeConfig {
    pub fn new(margin: f64) -> Result<Self> {
        if margin > 0.0 && margin.is_finite() {
            Ok(Self { margin })
        } else {
            Err(Error::NonpositiveMargin(margin))
        }
    }
}

impl Default for HingeConfig {
    fn default() -> Self {
        Self { margin: DEFAULT_MARGIN }
    }
}

/// `-z log sigma(d) - (1 - z) log sigma(-d)` at `d = r1 - r2`.
pub fn ce_loss(z: f64, scores: RewardPairScore) -> Result<f64> {
    check_label(z)?;
    Ok(ce_on_diff(z, scores.diff()))
}

/// `z max(0, C - d) + (1 - z) max(0, C + d)` at `d = r1 - r2`.
pub fn hinge_loss(z: f64, scores: RewardPairScore, cfg: HingeConfig) -> Result<f64> {
    check_label(z)?;
    Ok(hinge_on_diff(z, scores.diff(), cfg.margin))
}

/// Cross-entropy on the DPO implied reward difference.
pub fn dpo_loss(z: f64, scores: DpoPairScore) -> Result<f64> {
    check_label(z)?;
    if !(scores.beta > 0.0) {
        return Err(Error::NonpositiveBeta(scores.beta));
    }
    Ok(ce_on_diff(z, scores.implied_reward_diff()))
}

fn ce_on_diff(z: f64, d: f64) -> f64 {
    -z * clamped_ln(sigmoid(d)) - (1.0 - z) * clamped_ln(sigmoid(-d))
}

fn hinge_on_diff(z: f64, d: f64, margin: f64) -> f64 {
    z * (margin - d).max(0.0) + (1.0 - z) * (margin + d).max(0.0)
}

/// Loss family selector used by training and complexity estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Hinge { margin: f64 },
    /// Prediction is the log-ratio difference; the implied reward gap is `beta * prediction`.
    Dpo { beta: f64 },
    /// `(z - sigma(d))^2`. Not affine in `z`; kept as a negative control.
    Squared,
}

impl LossKind {
    pub fn hinge() -> Self {
        Self::Hinge { margin: DEFAULT_MARGIN }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Hinge { margin } => HingeConfig::new(margin).map(|_| ()),
            Self::Dpo { beta } if !(beta > 0.0) => Err(Error::NonpositiveBeta(beta)),
            _ => Ok(()),
        }
    }

    pub fn is_affine(&self) -> bool {
        !matches!(self, Self::Squared)
    }

    /// Loss at label `z` and scalar prediction `d`. No range check on `z`.
    pub fn eval(&self, z: f64, d: f64) -> f64 {
        match *self {
            Self::CrossEntropy => ce_on_diff(z, d),
            Self::Hinge { margin } => hinge_on_diff(z, d, margin),
            Self::Dpo { beta } => ce_on_diff(z, beta * d),
            Self::Squared => {
                let e = z - sigmoid(d);
                e * e
            }
        }
    }

    /// Derivative with respect to the prediction `d`. Hinge kinks take subgradient 0.
    pub fn grad(&self, z: f64, d: f64) -> f64 {
        match *self {
            Self::CrossEntropy => sigmoid(d) - z,
            Self::Dpo { beta } => beta * (sigmoid(beta * d) - z),
            Self::Hinge { margin } => {
                let mut g = 0.0;
                if margin - d > 0.0 {
                    g -= z;
                }
                if margin + d > 0.0 {
                    g += 1.0 - z;
                }
                g
            }
            Self::Squared => {
                let s = sigmoid(d);
                -2.0 * (z - s) * s * (1.0 - s)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::CrossEntropy => "ce",
            Self::Hinge { .. } => "hinge",
            Self::Dpo { .. } => "dpo",
            Self::Squared => "squared",
        }
    }
}

/// Gradient of `ce_loss` with respect to `(r1, r2)`.
pub fn ce_grad_scores(z: f64, scores: RewardPairScore) -> (f64, f64) {
    let g = LossKind::CrossEntropy.grad(z, scores.diff());
    (g, -g)
}

/// Largest gap `|E[loss(Z, d)] - loss(E[Z], d)|` over the probe predictions,
/// with the expectation computed exactly over `measure`.
pub fn verify_affinity(loss: LossKind, measure: &DiscreteMeasure, probes: &[f64]) -> f64 {
    let mean = measure.mean();
    probes
        .iter()
        .map(|&d| (measure.expect(|z| loss.eval(z, d)) - loss.eval(mean, d)).abs())
        .fold(0.0, f64::max)
}

/// Exact expected loss of a fixed prediction under a label measure.
pub fn expected_loss(loss: LossKind, measure: &DiscreteMeasure, d: f64) -> f64 {
    measure.expect(|z| loss.eval(z, d))
}
