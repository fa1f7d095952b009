use std::cell::Cell;
use std::collections::HashMap;

use super::IndexError;
use crate::ball::BallId;
use crate::metric::{FeatureVector, Metric, MetricError};

/// Exhaustive nearest-center search. Used as the reference implementation.
#[derive(Debug, Clone, Default)]
pub struct LinearScan {
    metric: Metric,
    entries: Vec<(BallId, FeatureVector)>,
    slot: HashMap<BallId, usize>,
    evals: Cell<u64>,
}

impl LinearScan {
    pub fn new(metric: Metric) -> Self {
        LinearScan {
            metric,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, id: BallId, center: FeatureVector) -> Result<(), IndexError> {
        if self.slot.contains_key(&id) {
            return Err(IndexError::DuplicateId(id));
        }
        if let Some((_, first)) = self.entries.first() {
            if first.dim() != center.dim() {
                return Err(MetricError::DimensionMismatch {
                    left: first.dim(),
                    right: center.dim(),
                }
                .into());
            }
        }
        self.slot.insert(id, self.entries.len());
        self.entries.push((id, center));
        Ok(())
    }

    pub fn remove(&mut self, id: BallId) -> Result<(), IndexError> {
        let k = self.slot.remove(&id).ok_or(IndexError::MissingId(id))?;
        self.entries.swap_remove(k);
        if let Some((moved, _)) = self.entries.get(k) {
            self.slot.insert(*moved, k);
        }
        Ok(())
    }

    pub fn nearest(&self, q: &FeatureVector) -> Result<Option<(BallId, f64)>, IndexError> {
        let mut best: Option<(BallId, f64)> = None;
        for (id, c) in &self.entries {
            let d = self.metric.distance(c, q)?;
            self.evals.set(self.evals.get() + 1);
            if best.is_none_or(|(bid, bd)| d < bd || (d == bd && *id < bid)) {
                best = Some((*id, d));
            }
        }
        Ok(best)
    }

    pub fn clear(&mut self) {
        self.entries.clear();
        self.slot.clear();
    }

    pub fn distance_evaluations(&self) -> u64 {
        self.evals.get()
    }
}
