//! BASE and BASE-ADJ.
//!
//! All balls share one radius that shrinks with the number of training
//! steps in the current phase, `t^(-1/(2+d))`, where `d` is the current
//! estimate of the metric dimension. When the cover grows past the size
//! that estimate allows, the cover is discarded and a new phase starts with
//! a larger estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LearnError, Learner};
use crate::ball::{BallId, BallModel, CenterCounter, Label};
use crate::index::IndexKind;
use crate::metric::{FeatureVector, Metric};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMode {
    /// Laplace-smoothed, randomized predictions over labels {0, 1}.
    BinaryRandomized,
    /// Deterministic majority vote over any number of labels.
    MulticlassMajority,
}

#[derive(Debug, Clone)]
pub struct BaseConfig {
    pub c_hat: f64,
    pub mode: BaseMode,
    /// Move centers toward correctly classified points (BASE-ADJ).
    pub adjust_centers: bool,
    pub metric: Metric,
    pub index: IndexKind,
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig {
            c_hat: 1.0,
            mode: BaseMode::MulticlassMajority,
            adjust_centers: false,
            metric: Metric::Euclidean,
            index: IndexKind::default(),
        }
    }
}

/// Phase bookkeeping for the dimension estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub phase_index: u32,
    /// Training steps seen in the current phase.
    pub phase_step: u64,
    pub dim_estimate: u32,
    pub current_radius: f64,
    pub space_constant: f64,
}

impl PhaseState {
    pub fn new(space_constant: f64) -> Self {
        PhaseState {
            phase_index: 1,
            phase_step: 0,
            dim_estimate: 1,
            current_radius: 1.0,
            space_constant,
        }
    }

    /// Largest cover the current estimate admits: `C·2^d·ε^(-d)`.
    pub fn capacity(&self) -> f64 {
        let d = self.dim_estimate as i32;
        self.space_constant * 2f64.powi(d) * self.current_radius.powi(-d)
    }

    /// Dimension estimate for a new phase triggered by a cover of `size`
    /// balls: `⌈log(size/C) / log(2/ε)⌉`.
    pub fn next_dim_estimate(&self, size: usize) -> Result<u32, LearnError> {
        if self.current_radius >= 2.0 {
            return Err(LearnError::InvalidState(format!(
                "radius {} leaves no room for a dimension estimate",
                self.current_radius
            )));
        }
        let est =
            ((size as f64 / self.space_constant).ln() / (2.0 / self.current_radius).ln()).ceil();
        // The overflow condition makes the estimate exceed the current one in
        // exact arithmetic; the clamp only absorbs rounding.
        Ok((est.max(0.0) as u32).max(self.dim_estimate + 1))
    }

    /// `ε = t^(-1/(2+d))`.
    pub fn update_radius(&mut self) {
        let t = self.phase_step.max(1) as f64;
        self.current_radius = t.powf(-1.0 / (2.0 + self.dim_estimate as f64));
    }
}

/// Output of the binary predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Probability of predicting `Label(1)`; `None` in majority mode.
    pub p_one: Option<f64>,
}

/// Laplace estimate `q`, margin `γ` and prediction probability `p` for a
/// ball with `positives` ones among `total` points.
pub fn laplace_probability(positives: u64, total: u64) -> (f64, f64, f64) {
    let q = (positives as f64 + 1.0) / (total as f64 + 2.0);
    let gamma = 1.0 / (2.0 * (total as f64 + 2.0).sqrt());
    let p = if q < 0.5 - gamma {
        0.0
    } else if q > 0.5 + gamma {
        1.0
    } else {
        0.5 + (q - 0.5) / (2.0 * gamma)
    };
    (q, gamma, p)
}

#[derive(Debug, Clone)]
pub struct BaseLearner {
    model: BallModel,
    phase: PhaseState,
    rng: ChaCha8Rng,
    mode: BaseMode,
    adjust_centers: bool,
    steps: u64,
}

impl BaseLearner {
    pub fn new(cfg: BaseConfig, seed: u64) -> Result<Self, LearnError> {
        if !(cfg.c_hat > 0.0 && cfg.c_hat.is_finite()) {
            return Err(LearnError::Config(format!(
                "c_hat must be positive, got {}",
                cfg.c_hat
            )));
        }
        if cfg.adjust_centers && cfg.mode == BaseMode::BinaryRandomized {
            return Err(LearnError::Config(
                "center adjustment needs majority mode".into(),
            ));
        }
        let mut model = BallModel::new(cfg.metric, cfg.index);
        model.set_shared_radius(1.0);
        Ok(BaseLearner {
            model,
            phase: PhaseState::new(cfg.c_hat),
            rng: ChaCha8Rng::seed_from_u64(seed),
            mode: cfg.mode,
            adjust_centers: cfg.adjust_centers,
            steps: 0,
        })
    }

    pub fn phase(&self) -> &PhaseState {
        &self.phase
    }

    /// Prediction with the probability used to draw it.
    pub fn predict_with_probability(
        &mut self,
        x: &FeatureVector,
    ) -> Result<Prediction, LearnError> {
        let Some((s, _)) = self.model.nearest(x)? else {
            return Ok(match self.mode {
                BaseMode::BinaryRandomized => Prediction {
                    label: Label(0),
                    p_one: Some(0.5),
                },
                BaseMode::MulticlassMajority => Prediction {
                    label: self.model.labels().first().unwrap_or(Label(0)),
                    p_one: None,
                },
            });
        };
        match self.mode {
            BaseMode::BinaryRandomized => {
                let ball = self.model.ball(s).expect("indexed ball exists");
                let (_, _, p) = laplace_probability(ball.positive_count(), ball.total_count());
                let label = if self.rng.random::<f64>() < p {
                    Label(1)
                } else {
                    Label(0)
                };
                Ok(Prediction {
                    label,
                    p_one: Some(p),
                })
            }
            BaseMode::MulticlassMajority => Ok(Prediction {
                label: self.model.majority_predict(s)?,
                p_one: None,
            }),
        }
    }

    /// Probability of predicting `Label(1)` at `x`, without drawing.
    pub fn probability_one(&self, x: &FeatureVector) -> Result<f64, LearnError> {
        Ok(match self.model.nearest(x)? {
            None => 0.5,
            Some((s, _)) => {
                let b = self.model.ball(s).expect("indexed ball exists");
                laplace_probability(b.positive_count(), b.total_count()).2
            }
        })
    }

    /// Trains on one example. Returns the ball that absorbed it.
    pub fn learn(&mut self, x: &FeatureVector, y: Label) -> Result<BallId, LearnError> {
        if self.mode == BaseMode::BinaryRandomized && y.0 > 1 {
            return Err(LearnError::NonBinaryLabel(y));
        }
        self.steps += 1;
        self.model.register_label(y);
        let covered = match self.model.nearest(x)? {
            Some((s, d)) if d <= self.phase.current_radius => Some(s),
            _ => None,
        };
        let id = match covered {
            Some(s) => {
                if self.adjust_centers && self.model.majority_predict(s)? == y {
                    self.model.adjust_center(s, x, CenterCounter::TotalCount)?;
                }
                self.model.update_counts(s, y)?;
                self.phase.phase_step += 1;
                s
            }
            None => self.add_ball_with_phase_check(x, y)?,
        };
        self.phase.update_radius();
        self.model.set_shared_radius(self.phase.current_radius);
        Ok(id)
    }

    /// Adds a ball at `x`, first starting a new phase if the cover would
    /// outgrow the current dimension estimate.
    pub fn add_ball_with_phase_check(
        &mut self,
        x: &FeatureVector,
        y: Label,
    ) -> Result<BallId, LearnError> {
        let size = self.model.len() + 1;
        if size as f64 > self.phase.capacity() {
            let next = self.phase.next_dim_estimate(size)?;
            self.model.clear();
            self.phase.dim_estimate = next;
            self.phase.phase_index += 1;
            self.phase.phase_step = 0;
        }
        let id = self
            .model
            .add_ball(x.clone(), self.phase.current_radius, y, self.steps)?;
        self.phase.phase_step += 1;
        Ok(id)
    }
}

impl Learner for BaseLearner {
    fn predict(&mut self, x: &FeatureVector) -> Option<Label> {
        if self.mode == BaseMode::MulticlassMajority && self.model.labels().is_empty() {
            return None;
        }
        self.predict_with_probability(x).ok().map(|p| p.label)
    }

    fn update(&mut self, x: &FeatureVector, y: Label) -> Result<(), LearnError> {
        self.learn(x, y).map(|_| ())
    }

    fn model_size(&self) -> usize {
        self.model.len()
    }

    fn model(&self) -> &BallModel {
        &self.model
    }
}
