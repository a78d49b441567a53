//! Ordinal preference feedback for reward learning.
//!
//! The crate covers unbiased ordinal-label synthesis from an oracle
//! preference probability, the label-affine loss family (cross-entropy,
//! hinge, DPO), hierarchical-expectation couplings between feedback
//! systems, exact and Monte Carlo Rademacher complexity, a linear
//! Bradley-Terry reward trainer for synthetic experiments, a soft-label
//! (distillation) lab and the `ordfb` command-line front end.

pub mod error;
pub mod rng;
pub mod scale;
pub mod measure;
pub mod item;
pub mod feedback;
pub mod losses;
pub mod coupling;
pub mod world;
pub mod complexity;
pub mod trainer;
pub mod soft_label;
pub mod cli;
mod lp;

pub use error::{Error, Result};
pub use item::PreferenceItem;
pub use measure::DiscreteMeasure;
pub use rng::RngSeed;
pub use scale::{scale_preset, validate_scale, FeedbackSystem, OrdinalScale, ScalePreset};
