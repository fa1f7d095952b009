//! AUTO and AUTO-ADJ.
//!
//! Each ball starts with a radius equal to the distance to the nearest
//! existing center and shrinks it as `R·m^(-1/(2+d̂))` with its own mistake
//! count `m`. AUTO-ADJ also pulls centers toward correctly classified
//! points. With a budget this is AUTO-ADJ FIX.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LearnError, Learner};
use crate::ball::{BallId, BallModel, CenterCounter, Label};
use crate::budget::BudgetPolicy;
use crate::index::IndexKind;
use crate::metric::{FeatureVector, Metric};

/// Radius given to a ball created at zero distance from another center.
pub const RADIUS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AutoConfig {
    pub d_hat: f64,
    pub adjust_centers: bool,
    pub max_balls: Option<usize>,
    pub metric: Metric,
    pub index: IndexKind,
}

impl Default for AutoConfig {
    fn default() -> Self {
        AutoConfig {
            d_hat: 2.0,
            adjust_centers: false,
            max_balls: None,
            metric: Metric::Euclidean,
            index: IndexKind::default(),
        }
    }
}

/// Start-up state: the cover is seeded by the first two differently
/// labelled points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bootstrap {
    AwaitingFirst,
    AwaitingSecondLabel { first: BallId, label: Label },
    Running,
}

/// `R·max(m,1)^(-1/(2+d̂))`.
pub fn shrunk_radius(init_radius: f64, mistakes: u64, d_hat: f64) -> f64 {
    init_radius * (mistakes.max(1) as f64).powf(-1.0 / (2.0 + d_hat))
}

#[derive(Debug, Clone)]
pub struct AutoLearner {
    model: BallModel,
    d_hat: f64,
    adjust_centers: bool,
    bootstrap: Bootstrap,
    budget: Option<BudgetPolicy>,
    steps: u64,
}

impl AutoLearner {
    pub fn new(cfg: AutoConfig, seed: u64) -> Result<Self, LearnError> {
        if !(cfg.d_hat > 0.0 && cfg.d_hat.is_finite()) {
            return Err(LearnError::Config(format!(
                "d_hat must be positive, got {}",
                cfg.d_hat
            )));
        }
        let budget = match cfg.max_balls {
            Some(0) => return Err(LearnError::Config("ball budget must be positive".into())),
            Some(b) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(3);
                Some(BudgetPolicy::new(b, rng.next_u64()))
            }
            None => None,
        };
        Ok(AutoLearner {
            model: BallModel::new(cfg.metric, cfg.index),
            d_hat: cfg.d_hat,
            adjust_centers: cfg.adjust_centers,
            bootstrap: Bootstrap::AwaitingFirst,
            budget,
            steps: 0,
        })
    }

    pub fn bootstrap_state(&self) -> Bootstrap {
        self.bootstrap
    }

    fn add_ball(&mut self, x: &FeatureVector, radius: f64, y: Label) -> Result<BallId, LearnError> {
        let id = self.model.add_ball(x.clone(), radius, y, self.steps)?;
        if let Some(b) = self.budget.as_mut() {
            b.maybe_evict(&mut self.model, id)?;
        }
        Ok(id)
    }

    /// Consumes an example while the cover is being seeded.
    pub fn auto_bootstrap(&mut self, x: &FeatureVector, y: Label) -> Result<bool, LearnError> {
        match self.bootstrap {
            Bootstrap::AwaitingFirst => {
                self.model.register_label(y);
                // Radius is set once a second label shows up.
                let first = self.add_ball(x, RADIUS_FLOOR, y)?;
                self.bootstrap = Bootstrap::AwaitingSecondLabel { first, label: y };
            }
            Bootstrap::AwaitingSecondLabel { label, .. } if label == y => {}
            Bootstrap::AwaitingSecondLabel { first, .. } => {
                self.model.register_label(y);
                let c1 = self
                    .model
                    .ball(first)
                    .expect("bootstrap ball is present")
                    .center()
                    .clone();
                let r = self
                    .model
                    .metric()
                    .distance(&c1, x)
                    .map_err(crate::ball::ModelError::from)?;
                let r = if r > 0.0 { r } else { RADIUS_FLOOR };
                self.model.set_radii(first, r)?;
                self.add_ball(x, r, y)?;
                self.bootstrap = Bootstrap::Running;
            }
            Bootstrap::Running => {
                return Err(LearnError::InvalidState(
                    "bootstrap already finished".into(),
                ));
            }
        }
        Ok(true)
    }

    /// One training step once the cover is seeded. Returns the label the
    /// nearest ball predicted before learning.
    pub fn auto_step(&mut self, x: &FeatureVector, y: Label) -> Result<Label, LearnError> {
        if self.bootstrap != Bootstrap::Running {
            return Err(LearnError::InvalidState("bootstrap not finished".into()));
        }
        self.model.register_label(y);
        let (s, d) = self
            .model
            .nearest(x)?
            .ok_or_else(|| LearnError::InvalidState("running learner has no balls".into()))?;
        let predicted = self.model.majority_predict(s)?;
        let radius = self.model.ball(s).expect("indexed ball exists").radius();
        if d <= radius {
            if predicted != y {
                self.model.record_mistake(s)?;
            } else if self.adjust_centers {
                self.model.adjust_center(s, x, CenterCounter::UpdateCount)?;
            }
            self.model.update_counts(s, y)?;
            let b = self.model.ball(s).expect("indexed ball exists");
            let eps = shrunk_radius(b.init_radius(), b.mistake_count(), self.d_hat);
            self.model.set_radius(s, eps)?;
        } else {
            // d > radius ≥ 0, so the new radius is positive.
            self.add_ball(x, d, y)?;
        }
        Ok(predicted)
    }
}

impl Learner for AutoLearner {
    fn predict(&mut self, x: &FeatureVector) -> Option<Label> {
        let (s, _) = self.model.nearest(x).ok().flatten()?;
        self.model.majority_predict(s).ok()
    }

    fn update(&mut self, x: &FeatureVector, y: Label) -> Result<(), LearnError> {
        self.steps += 1;
        if self.bootstrap == Bootstrap::Running {
            self.auto_step(x, y).map(|_| ())
        } else {
            self.auto_bootstrap(x, y).map(|_| ())
        }
    }

    fn model_size(&self) -> usize {
        self.model.len()
    }

    fn model(&self) -> &BallModel {
        &self.model
    }
}
