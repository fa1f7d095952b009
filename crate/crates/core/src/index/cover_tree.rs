//! A dynamic cover tree over ball centers.
//!
//! Every node carries an integer level `l` and covers its children within
//! `2^l`; a child always sits at a strictly lower level than its parent.
//! Each node also keeps `max_dist`, an upper bound on the distance from its
//! point to any descendant, which drives branch-and-bound pruning.
//!
//! Removal is lazy: a removed node keeps routing queries but is never
//! reported. Once tombstones outnumber live entries the tree is rebuilt
//! from the live ones in id order.

use std::cell::Cell;
use std::collections::HashMap;

use super::IndexError;
use crate::ball::BallId;
use crate::metric::{FeatureVector, Metric, MetricError};

const REBUILD_MIN_DEAD: usize = 64;
// Relative slack on pruning bounds, absorbs rounding in the triangle inequality.
const PRUNE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Node {
    point: FeatureVector,
    id: BallId,
    live: bool,
    level: i32,
    max_dist: f64,
    children: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct CoverTree {
    metric: Metric,
    nodes: Vec<Node>,
    root: Option<usize>,
    slot: HashMap<BallId, usize>,
    dead: usize,
    evals: Cell<u64>,
}

fn cover_radius(level: i32) -> f64 {
    2f64.powi(level)
}

impl CoverTree {
    pub fn new(metric: Metric) -> Self {
        CoverTree {
            metric,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.slot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slot.is_empty()
    }

    pub fn distance_evaluations(&self) -> u64 {
        self.evals.get()
    }

    fn dist(&self, a: &FeatureVector, b: &FeatureVector) -> f64 {
        self.evals.set(self.evals.get() + 1);
        self.metric.distance_unchecked(a, b)
    }

    pub fn insert(&mut self, id: BallId, center: FeatureVector) -> Result<(), IndexError> {
        if self.slot.contains_key(&id) {
            return Err(IndexError::DuplicateId(id));
        }
        let Some(root) = self.root else {
            self.nodes.push(Node {
                point: center,
                id,
                live: true,
                level: 0,
                max_dist: 0.0,
                children: Vec::new(),
            });
            self.root = Some(self.nodes.len() - 1);
            self.slot.insert(id, self.nodes.len() - 1);
            return Ok(());
        };
        let root_dim = self.nodes[root].point.dim();
        if root_dim != center.dim() {
            return Err(MetricError::DimensionMismatch {
                left: root_dim,
                right: center.dim(),
            }
            .into());
        }

        let mut d = self.dist(&self.nodes[root].point, &center);
        // Raising the root level only loosens its covering constraint.
        while cover_radius(self.nodes[root].level) < d {
            self.nodes[root].level += 1;
        }

        let mut p = root;
        loop {
            if d > self.nodes[p].max_dist {
                self.nodes[p].max_dist = d;
            }
            let mut next: Option<(usize, f64)> = None;
            for &c in &self.nodes[p].children {
                let dc = self.dist(&self.nodes[c].point, &center);
                if dc <= cover_radius(self.nodes[c].level) && next.is_none_or(|(_, bd)| dc < bd) {
                    next = Some((c, dc));
                }
            }
            match next {
                Some((c, dc)) => {
                    p = c;
                    d = dc;
                }
                None => break,
            }
        }

        let level = self.nodes[p].level - 1;
        self.nodes.push(Node {
            point: center,
            id,
            live: true,
            level,
            max_dist: 0.0,
            children: Vec::new(),
        });
        let k = self.nodes.len() - 1;
        self.nodes[p].children.push(k);
        self.slot.insert(id, k);
        Ok(())
    }

    pub fn remove(&mut self, id: BallId) -> Result<(), IndexError> {
        let k = self.slot.remove(&id).ok_or(IndexError::MissingId(id))?;
        self.nodes[k].live = false;
        self.dead += 1;
        if self.slot.is_empty() {
            self.clear();
        } else if self.dead >= REBUILD_MIN_DEAD && self.dead > self.slot.len() {
            self.rebuild();
        }
        Ok(())
    }

    fn rebuild(&mut self) {
        let mut live: Vec<(BallId, FeatureVector)> = std::mem::take(&mut self.nodes)
            .into_iter()
            .filter(|n| n.live)
            .map(|n| (n.id, n.point))
            .collect();
        live.sort_by_key(|(id, _)| *id);
        self.clear();
        for (id, p) in live {
            self.insert(id, p).expect("rebuild reinserts distinct ids");
        }
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.root = None;
        self.slot.clear();
        self.dead = 0;
    }

    pub fn nearest(&self, q: &FeatureVector) -> Result<Option<(BallId, f64)>, IndexError> {
        let Some(root) = self.root else {
            return Ok(None);
        };
        let root_dim = self.nodes[root].point.dim();
        if root_dim != q.dim() {
            return Err(MetricError::DimensionMismatch {
                left: root_dim,
                right: q.dim(),
            }
            .into());
        }

        let mut best: Option<(BallId, f64)> = None;
        let d_root = self.dist(&self.nodes[root].point, q);
        let mut stack = vec![(root, d_root)];
        let mut kids: Vec<(usize, f64)> = Vec::new();
        while let Some((n, d)) = stack.pop() {
            let node = &self.nodes[n];
            let lower = d - node.max_dist;
            if let Some((_, bd)) = best {
                if lower > bd + PRUNE_SLACK * (d + node.max_dist + bd) {
                    continue;
                }
            }
            if node.live && best.is_none_or(|(bid, bd)| d < bd || (d == bd && node.id < bid)) {
                best = Some((node.id, d));
            }
            kids.clear();
            kids.extend(
                node.children
                    .iter()
                    .map(|&c| (c, self.dist(&self.nodes[c].point, q))),
            );
            // Closest child is explored first.
            kids.sort_by(|a, b| b.1.total_cmp(&a.1));
            stack.extend_from_slice(&kids);
        }
        Ok(best)
    }

    /// Checks the structural invariants: levels strictly decrease along
    /// edges, every child lies within its parent's covering radius, and
    /// every descendant lies within its ancestor's `max_dist`.
    pub fn check_invariants(&self) -> Result<(), String> {
        let Some(root) = self.root else {
            return if self.nodes.is_empty() {
                Ok(())
            } else {
                Err("nodes without root".into())
            };
        };
        let tol = |x: f64| x * (1.0 + 1e-12) + 1e-300;
        let mut seen = 0usize;
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            seen += 1;
            let node = &self.nodes[n];
            for &c in &node.children {
                let child = &self.nodes[c];
                if child.level >= node.level {
                    return Err(format!(
                        "child level {} >= parent level {}",
                        child.level, node.level
                    ));
                }
                let d = self.metric.distance_unchecked(&node.point, &child.point);
                if d > tol(cover_radius(node.level)) {
                    return Err(format!(
                        "child at {d} outside cover radius 2^{}",
                        node.level
                    ));
                }
                stack.push(c);
            }
            let mut sub = node.children.clone();
            while let Some(s) = sub.pop() {
                let d = self
                    .metric
                    .distance_unchecked(&node.point, &self.nodes[s].point);
                if d > tol(node.max_dist) {
                    return Err(format!(
                        "descendant at {d} beyond max_dist {}",
                        node.max_dist
                    ));
                }
                sub.extend_from_slice(&self.nodes[s].children);
            }
            if node.live && self.slot.get(&node.id) != Some(&n) {
                return Err(format!("live node {:?} missing from id map", node.id));
            }
        }
        if seen != self.nodes.len() {
            return Err(format!("{} nodes unreachable", self.nodes.len() - seen));
        }
        Ok(())
    }
}
