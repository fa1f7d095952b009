//! Constant model size by randomized ball eviction.
//!
//! Once the cover exceeds its budget, one existing ball is discarded with
//! probability proportional to its mistake count plus one. The ball that
//! was just inserted never takes part in the draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ball::{Ball, BallId, BallModel, ModelError};

/// Eviction probabilities `(m_i + 1) / (Σ_j m_j + |S|)` in iteration order.
pub fn eviction_distribution<'a>(balls: impl IntoIterator<Item = &'a Ball>) -> Vec<f64> {
    let weights: Vec<u64> = balls.into_iter().map(|b| b.mistake_count() + 1).collect();
    let total: u64 = weights.iter().sum();
    weights.iter().map(|&w| w as f64 / total as f64).collect()
}

#[derive(Debug, Clone)]
pub struct BudgetPolicy {
    max_balls: usize,
    rng: ChaCha8Rng,
}

impl BudgetPolicy {
    /// `max_balls` must be at least one.
    pub fn new(max_balls: usize, seed: u64) -> Self {
        assert!(max_balls >= 1, "ball budget must be positive");
        BudgetPolicy {
            max_balls,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn max_balls(&self) -> usize {
        self.max_balls
    }

    /// Draws an index from the eviction distribution of `balls`.
    ///
    /// Sampling is exact: an integer is drawn uniformly below the total
    /// weight and mapped back through the cumulative weights.
    pub fn sample<'a>(&mut self, balls: impl IntoIterator<Item = &'a Ball>) -> Option<usize> {
        let weights: Vec<u64> = balls.into_iter().map(|b| b.mistake_count() + 1).collect();
        let total: u64 = weights.iter().sum();
        if total == 0 {
            return None;
        }
        let mut r = self.rng.random_range(0..total);
        for (i, w) in weights.iter().enumerate() {
            if r < *w {
                return Some(i);
            }
            r -= w;
        }
        unreachable!("draw below total weight")
    }

    /// Call right after inserting `newcomer`. Evicts one other ball when the
    /// model is over budget and returns its id.
    pub fn maybe_evict(
        &mut self,
        model: &mut BallModel,
        newcomer: BallId,
    ) -> Result<Option<BallId>, ModelError> {
        if model.len() <= self.max_balls {
            return Ok(None);
        }
        let candidates: Vec<&Ball> = model.balls().filter(|b| b.id != newcomer).collect();
        let Some(k) = self.sample(candidates.iter().copied()) else {
            return Ok(None);
        };
        let victim = candidates[k].id;
        model.remove_ball(victim)?;
        Ok(Some(victim))
    }
}
