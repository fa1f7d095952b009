//! The learners of the family and the interface they share.

mod auto;
mod base;

pub use auto::{shrunk_radius, AutoConfig, AutoLearner, Bootstrap, RADIUS_FLOOR};
pub use base::{laplace_probability, BaseConfig, BaseLearner, BaseMode, PhaseState, Prediction};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ball::{BallModel, Label, ModelError};
use crate::index::IndexKind;
use crate::metric::{FeatureVector, Metric};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LearnError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("binary mode accepts labels 0 and 1 only, got {0:?}")]
    NonBinaryLabel(Label),
    #[error("invalid learner state: {0}")]
    InvalidState(String),
    #[error("invalid learner configuration: {0}")]
    Config(String),
}

/// Online classifier: predict, then (maybe) learn from the true label.
pub trait Learner {
    /// Predicted label for `x`, or `None` when the learner has seen no label
    /// yet and cannot name one.
    fn predict(&mut self, x: &FeatureVector) -> Option<Label>;

    fn update(&mut self, x: &FeatureVector, y: Label) -> Result<(), LearnError>;

    /// Number of balls in the cover.
    fn model_size(&self) -> usize;

    fn model(&self) -> &BallModel;
}

impl<L: Learner + ?Sized> Learner for Box<L> {
    fn predict(&mut self, x: &FeatureVector) -> Option<Label> {
        (**self).predict(x)
    }
    fn update(&mut self, x: &FeatureVector, y: Label) -> Result<(), LearnError> {
        (**self).update(x, y)
    }
    fn model_size(&self) -> usize {
        (**self).model_size()
    }
    fn model(&self) -> &BallModel {
        (**self).model()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Base,
    BaseAdj,
    Auto,
    AutoAdj,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Base,
        Variant::BaseAdj,
        Variant::Auto,
        Variant::AutoAdj,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::BaseAdj => "base-adj",
            Variant::Auto => "auto",
            Variant::AutoAdj => "auto-adj",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                format!("unknown variant `{s}` (expected base, base-adj, auto or auto-adj)")
            })
    }
}

/// Everything needed to construct a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub variant: Variant,
    /// Space constant for the BASE variants.
    #[serde(default = "default_c_hat")]
    pub c_hat: f64,
    /// Fixed dimension estimate for the AUTO variants.
    #[serde(default = "default_d_hat")]
    pub d_hat: f64,
    /// Use the binary randomized predictor (BASE only).
    #[serde(default)]
    pub binary: bool,
    /// Ball budget; only valid with AUTO-ADJ.
    #[serde(default)]
    pub max_balls: Option<usize>,
    #[serde(default)]
    pub index: Option<IndexKind>,
}

fn default_c_hat() -> f64 {
    1.0
}

fn default_d_hat() -> f64 {
    2.0
}

impl LearnerSpec {
    pub fn new(variant: Variant) -> Self {
        LearnerSpec {
            variant,
            c_hat: default_c_hat(),
            d_hat: default_d_hat(),
            binary: false,
            max_balls: None,
            index: None,
        }
    }

    pub fn with_budget(mut self, max_balls: usize) -> Self {
        self.max_balls = Some(max_balls);
        self
    }

    /// Builds the learner; `seed` drives all of its internal randomness.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Learner + Send>, LearnError> {
        let index = self.index.unwrap_or_default();
        if self.max_balls.is_some() && self.variant != Variant::AutoAdj {
            return Err(LearnError::Config(
                "a ball budget requires the auto-adj variant".into(),
            ));
        }
        if self.binary && self.variant != Variant::Base {
            return Err(LearnError::Config(
                "binary mode is only available for base".into(),
            ));
        }
        Ok(match self.variant {
            Variant::Base | Variant::BaseAdj => Box::new(BaseLearner::new(
                BaseConfig {
                    c_hat: self.c_hat,
                    mode: if self.binary {
                        BaseMode::BinaryRandomized
                    } else {
                        BaseMode::MulticlassMajority
                    },
                    adjust_centers: self.variant == Variant::BaseAdj,
                    metric: Metric::Euclidean,
                    index,
                },
                seed,
            )?),
            Variant::Auto | Variant::AutoAdj => Box::new(AutoLearner::new(
                AutoConfig {
                    d_hat: self.d_hat,
                    adjust_centers: self.variant == Variant::AutoAdj,
                    max_balls: self.max_balls,
                    metric: Metric::Euclidean,
                    index,
                },
                seed,
            )?),
        })
    }
}
