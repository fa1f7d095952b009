//! Exact nearest-center search over ball centers.
//!
//! [`CenterIndex`] wraps either a [`CoverTree`] (the default) or a
//! [`LinearScan`]. Building with the `linear-scan` feature makes
//! [`IndexKind::default`] pick the linear scan everywhere.
//!
//! Distance ties are broken by the smaller [`BallId`]; ids are allocated in
//! creation order, so the older ball wins.

mod cover_tree;
mod linear;

pub use cover_tree::CoverTree;
pub use linear::LinearScan;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ball::BallId;
use crate::metric::{FeatureVector, Metric, MetricError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IndexError {
    #[error("ball {0:?} is already indexed")]
    DuplicateId(BallId),
    #[error("ball {0:?} is not indexed")]
    MissingId(BallId),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexKind {
    CoverTree,
    LinearScan,
}

impl Default for IndexKind {
    fn default() -> Self {
        if cfg!(feature = "linear-scan") {
            IndexKind::LinearScan
        } else {
            IndexKind::CoverTree
        }
    }
}

#[derive(Debug, Clone)]
pub enum CenterIndex {
    CoverTree(CoverTree),
    LinearScan(LinearScan),
}

impl CenterIndex {
    pub fn new(kind: IndexKind, metric: Metric) -> Self {
        match kind {
            IndexKind::CoverTree => CenterIndex::CoverTree(CoverTree::new(metric)),
            IndexKind::LinearScan => CenterIndex::LinearScan(LinearScan::new(metric)),
        }
    }

    pub fn insert(&mut self, id: BallId, center: FeatureVector) -> Result<(), IndexError> {
        match self {
            CenterIndex::CoverTree(t) => t.insert(id, center),
            CenterIndex::LinearScan(l) => l.insert(id, center),
        }
    }

    pub fn remove(&mut self, id: BallId) -> Result<(), IndexError> {
        match self {
            CenterIndex::CoverTree(t) => t.remove(id),
            CenterIndex::LinearScan(l) => l.remove(id),
        }
    }

    /// Nearest indexed center to `q` and its distance, or `None` when empty.
    pub fn nearest(&self, q: &FeatureVector) -> Result<Option<(BallId, f64)>, IndexError> {
        match self {
            CenterIndex::CoverTree(t) => t.nearest(q),
            CenterIndex::LinearScan(l) => l.nearest(q),
        }
    }

    pub fn clear(&mut self) {
        match self {
            CenterIndex::CoverTree(t) => t.clear(),
            CenterIndex::LinearScan(l) => l.clear(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            CenterIndex::CoverTree(t) => t.len(),
            CenterIndex::LinearScan(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total distance evaluations performed so far (inserts and queries).
    pub fn distance_evaluations(&self) -> u64 {
        match self {
            CenterIndex::CoverTree(t) => t.distance_evaluations(),
            CenterIndex::LinearScan(l) => l.distance_evaluations(),
        }
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        match self {
            CenterIndex::CoverTree(t) => t.check_invariants(),
            CenterIndex::LinearScan(_) => Ok(()),
        }
    }
}
