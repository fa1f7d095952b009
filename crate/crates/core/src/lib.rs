//! Streaming classifiers that cover the input space with labelled balls.
//!
//! Four learners share one template: find the nearest ball, predict with
//! its local statistics, then either update that ball or open a new one.
//! [`learner::BaseLearner`] shrinks all radii with time and estimates the
//! metric dimension in phases; [`learner::AutoLearner`] shrinks each ball
//! on its own mistakes. Both can pull centers toward correctly classified
//! points, and the AUTO learner can hold a fixed ball budget through
//! [`budget::BudgetPolicy`].
//!
//! [`eval`] runs the test-then-train protocol with label sub-sampling,
//! [`ingest`] reads LIBSVM and CSV streams, [`synth`] generates seeded
//! streams and [`experiment`] ties these into reproducible result files.

pub mod ball;
pub mod budget;
pub mod eval;
pub mod experiment;
pub mod index;
pub mod ingest;
pub mod learner;
pub mod metric;
pub mod synth;

pub use ball::{Ball, BallId, BallModel, Label};
pub use learner::{Learner, LearnerSpec, Variant};
pub use metric::{FeatureVector, Metric};
