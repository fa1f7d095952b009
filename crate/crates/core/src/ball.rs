//! Balls, the local classifiers of the cover, and the [`BallModel`] that
//! holds them together with the label registry and the center index.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::{CenterIndex, IndexError, IndexKind};
use crate::metric::{FeatureVector, Metric, MetricError};

/// Dense internal id of a class label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub u32);

/// Ball identifier. Allocated in creation order, so ids also order balls by
/// age.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BallId(pub u64);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("ball has no labelled points")]
    EmptyBall,
    #[error("unknown ball {0:?}")]
    UnknownBall(BallId),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Labels observed so far, in first-registration order.
#[derive(Debug, Clone, Default)]
pub struct LabelRegistry {
    order: Vec<Label>,
    rank: HashMap<Label, usize>,
}

impl LabelRegistry {
    /// Adds `y`, returning whether it was new.
    pub fn register(&mut self, y: Label) -> bool {
        if self.rank.contains_key(&y) {
            return false;
        }
        self.rank.insert(y, self.order.len());
        self.order.push(y);
        true
    }

    pub fn contains(&self, y: Label) -> bool {
        self.rank.contains_key(&y)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        self.order.iter().copied()
    }

    pub fn first(&self) -> Option<Label> {
        self.order.first().copied()
    }
}

/// Which counter drives the incremental-mean center update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CenterCounter {
    /// Divide by the label total including the current point. The total
    /// itself is advanced by the [`Ball::update_counts`] call that follows.
    TotalCount,
    /// Increment the dedicated center-update counter and divide by it.
    UpdateCount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub id: BallId,
    center: FeatureVector,
    pub(crate) radius: f64,
    pub(crate) init_radius: f64,
    class_counts: Vec<u64>,
    binary_positive_count: u64,
    total_count: u64,
    mistake_count: u64,
    center_update_count: u64,
    pub birth_index: u64,
}

impl Ball {
    /// A ball at `center` holding the single label `y`.
    pub fn new(id: BallId, center: FeatureVector, radius: f64, y: Label, birth_index: u64) -> Self {
        let mut b = Ball {
            id,
            center,
            radius,
            init_radius: radius,
            class_counts: Vec::new(),
            binary_positive_count: 0,
            total_count: 0,
            mistake_count: 0,
            center_update_count: 1,
            birth_index,
        };
        b.update_counts(y);
        b
    }

    pub fn center(&self) -> &FeatureVector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn init_radius(&self) -> f64 {
        self.init_radius
    }

    pub fn count(&self, y: Label) -> u64 {
        self.class_counts.get(y.0 as usize).copied().unwrap_or(0)
    }

    /// Number of points labelled `Label(1)`, the positive class of binary
    /// streams.
    pub fn positive_count(&self) -> u64 {
        self.binary_positive_count
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn mistake_count(&self) -> u64 {
        self.mistake_count
    }

    pub fn center_update_count(&self) -> u64 {
        self.center_update_count
    }

    pub(crate) fn record_mistake(&mut self) {
        self.mistake_count += 1;
    }

    pub fn update_counts(&mut self, y: Label) {
        let k = y.0 as usize;
        if self.class_counts.len() <= k {
            self.class_counts.resize(k + 1, 0);
        }
        self.class_counts[k] += 1;
        self.total_count += 1;
        if y == Label(1) {
            self.binary_positive_count += 1;
        }
    }

    /// Majority label; ties go to the label registered first.
    pub fn majority_predict(&self, labels: &LabelRegistry) -> Result<Label, ModelError> {
        if self.total_count == 0 {
            return Err(ModelError::EmptyBall);
        }
        let mut best: Option<(Label, u64)> = None;
        for y in labels.iter() {
            let c = self.count(y);
            if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
                best = Some((y, c));
            }
        }
        // Counts for unregistered labels only arise when a ball is used
        // standalone; fall back to id order for those.
        if best.is_none() {
            for (k, &c) in self.class_counts.iter().enumerate() {
                if c > 0 && best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((Label(k as u32), c));
                }
            }
        }
        Ok(best.expect("nonempty ball has a positive count").0)
    }

    /// Moves the center toward `x` by one incremental-mean step.
    pub fn adjust_center(
        &mut self,
        x: &FeatureVector,
        counter: CenterCounter,
    ) -> Result<(), ModelError> {
        let n = match counter {
            CenterCounter::TotalCount => self.total_count + 1,
            CenterCounter::UpdateCount => {
                self.center_update_count += 1;
                self.center_update_count
            }
        };
        self.center.move_toward(x, 1.0 / n as f64)?;
        Ok(())
    }

    fn dump_record(&self, radius: f64, labels: &LabelRegistry) -> BallRecord {
        BallRecord {
            id: self.id.0,
            center: self.center.to_dense(),
            radius,
            class_counts: labels
                .iter()
                .filter(|&y| self.count(y) > 0)
                .map(|y| (y.0, self.count(y)))
                .collect(),
            total_count: self.total_count,
            mistake_count: self.mistake_count,
        }
    }
}

/// One line of a model dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRecord {
    pub id: u64,
    pub center: Vec<f64>,
    pub radius: f64,
    /// `(label id, count)` pairs in registry order.
    pub class_counts: Vec<(u32, u64)>,
    pub total_count: u64,
    pub mistake_count: u64,
}

/// The set of balls, the label registry and the center index.
#[derive(Debug, Clone)]
pub struct BallModel {
    balls: BTreeMap<BallId, Ball>,
    labels: LabelRegistry,
    metric: Metric,
    index: CenterIndex,
    next_id: u64,
    shared_radius: Option<f64>,
}

impl BallModel {
    pub fn new(metric: Metric, kind: IndexKind) -> Self {
        BallModel {
            balls: BTreeMap::new(),
            labels: LabelRegistry::default(),
            metric,
            index: CenterIndex::new(kind, metric),
            next_id: 0,
            shared_radius: None,
        }
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn register_label(&mut self, y: Label) -> bool {
        self.labels.register(y)
    }

    pub fn labels(&self) -> &LabelRegistry {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn ball(&self, id: BallId) -> Option<&Ball> {
        self.balls.get(&id)
    }

    /// Balls in id (age) order.
    pub fn balls(&self) -> impl Iterator<Item = &Ball> {
        self.balls.values()
    }

    pub fn index(&self) -> &CenterIndex {
        &self.index
    }

    pub fn nearest(&self, x: &FeatureVector) -> Result<Option<(BallId, f64)>, ModelError> {
        Ok(self.index.nearest(x)?)
    }

    /// Adds a ball holding the label `y` and returns its id.
    pub fn add_ball(
        &mut self,
        center: FeatureVector,
        radius: f64,
        y: Label,
        birth_index: u64,
    ) -> Result<BallId, ModelError> {
        let id = BallId(self.next_id);
        self.index.insert(id, center.clone())?;
        self.next_id += 1;
        self.register_label(y);
        self.balls
            .insert(id, Ball::new(id, center, radius, y, birth_index));
        Ok(id)
    }

    pub fn remove_ball(&mut self, id: BallId) -> Result<Ball, ModelError> {
        let ball = self.balls.remove(&id).ok_or(ModelError::UnknownBall(id))?;
        self.index.remove(id)?;
        Ok(ball)
    }

    /// Drops every ball. The label registry is kept.
    pub fn clear(&mut self) {
        self.balls.clear();
        self.index.clear();
    }

    fn ball_mut(&mut self, id: BallId) -> Result<&mut Ball, ModelError> {
        self.balls.get_mut(&id).ok_or(ModelError::UnknownBall(id))
    }

    pub fn update_counts(&mut self, id: BallId, y: Label) -> Result<(), ModelError> {
        self.register_label(y);
        self.ball_mut(id)?.update_counts(y);
        Ok(())
    }

    pub fn record_mistake(&mut self, id: BallId) -> Result<(), ModelError> {
        self.ball_mut(id)?.record_mistake();
        Ok(())
    }

    pub fn majority_predict(&self, id: BallId) -> Result<Label, ModelError> {
        self.balls
            .get(&id)
            .ok_or(ModelError::UnknownBall(id))?
            .majority_predict(&self.labels)
    }

    /// Moves a center and re-indexes it.
    pub fn adjust_center(
        &mut self,
        id: BallId,
        x: &FeatureVector,
        counter: CenterCounter,
    ) -> Result<(), ModelError> {
        let ball = self.balls.get_mut(&id).ok_or(ModelError::UnknownBall(id))?;
        ball.adjust_center(x, counter)?;
        let center = ball.center.clone();
        self.index.remove(id)?;
        self.index.insert(id, center)?;
        Ok(())
    }

    pub(crate) fn set_radius(&mut self, id: BallId, radius: f64) -> Result<(), ModelError> {
        self.ball_mut(id)?.radius = radius;
        Ok(())
    }

    pub(crate) fn set_radii(&mut self, id: BallId, radius: f64) -> Result<(), ModelError> {
        let b = self.ball_mut(id)?;
        b.radius = radius;
        b.init_radius = radius;
        Ok(())
    }

    /// Makes every ball report `radius`, for learners whose balls share one
    /// global radius.
    pub(crate) fn set_shared_radius(&mut self, radius: f64) {
        self.shared_radius = Some(radius);
    }

    /// Radius of a ball, taking a shared radius into account.
    pub fn radius_of(&self, id: BallId) -> Option<f64> {
        let b = self.balls.get(&id)?;
        Some(self.shared_radius.unwrap_or(b.radius))
    }

    pub fn dump_records(&self) -> Vec<BallRecord> {
        self.balls
            .values()
            .map(|b| b.dump_record(self.shared_radius.unwrap_or(b.radius), &self.labels))
            .collect()
    }

    /// Writes one JSON object per ball, one per line.
    pub fn dump_jsonl<W: Write>(&self, w: W) -> std::io::Result<()> {
        write_jsonl(w, &self.dump_records())
    }
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[BallRecord]) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(v: &[f64]) -> FeatureVector {
        FeatureVector::dense(v.to_vec()).unwrap()
    }

    const A: Label = Label(0);
    const B: Label = Label(1);
    const C: Label = Label(2);

    fn registry(labels: &[Label]) -> LabelRegistry {
        let mut r = LabelRegistry::default();
        for &y in labels {
            r.register(y);
        }
        r
    }

    #[test]
    fn register_label_examples() {
        let mut m = BallModel::new(Metric::Euclidean, IndexKind::CoverTree);
        assert!(m.register_label(Label(7)));
        assert_eq!(m.labels().len(), 1);
        assert!(!m.register_label(Label(7)));
        assert_eq!(m.labels().len(), 1);
        assert!(m.register_label(Label(2)));
        assert_eq!(m.labels().len(), 2);
    }

    fn ball_with(counts: &[(Label, u64)]) -> Ball {
        let mut b = Ball::new(BallId(0), pt(&[0.0]), 1.0, counts[0].0, 0);
        for (i, &(y, n)) in counts.iter().enumerate() {
            let extra = if i == 0 { n - 1 } else { n };
            for _ in 0..extra {
                b.update_counts(y);
            }
        }
        b
    }

    #[test]
    fn majority_examples() {
        let reg = registry(&[A, B]);
        assert_eq!(
            ball_with(&[(A, 3), (B, 1)]).majority_predict(&reg).unwrap(),
            A
        );
        assert_eq!(
            ball_with(&[(A, 2), (B, 2)]).majority_predict(&reg).unwrap(),
            A
        );
        assert_eq!(
            ball_with(&[(B, 2), (A, 2)])
                .majority_predict(&registry(&[B, A]))
                .unwrap(),
            B
        );
        assert_eq!(ball_with(&[(B, 1)]).majority_predict(&reg).unwrap(), B);
    }

    #[test]
    fn majority_on_empty_ball_is_an_error() {
        let mut b = ball_with(&[(A, 1)]);
        b.class_counts.clear();
        b.total_count = 0;
        assert_eq!(
            b.majority_predict(&registry(&[A])),
            Err(ModelError::EmptyBall)
        );
    }

    #[test]
    fn update_counts_examples() {
        let mut b = ball_with(&[(A, 1)]);
        b.update_counts(A);
        assert_eq!((b.count(A), b.total_count()), (2, 2));
        let mut b = ball_with(&[(A, 1)]);
        b.update_counts(B);
        assert_eq!((b.count(A), b.count(B), b.total_count()), (1, 1, 2));
        let b = ball_with(&[(C, 1)]);
        assert_eq!((b.count(C), b.total_count()), (1, 1));
    }

    #[test]
    fn adjust_center_examples() {
        // counter 1 -> 2
        let mut b = Ball::new(BallId(0), pt(&[0.0, 0.0]), 1.0, A, 0);
        b.adjust_center(&pt(&[2.0, 0.0]), CenterCounter::UpdateCount)
            .unwrap();
        assert_eq!(b.center().to_dense(), vec![1.0, 0.0]);
        assert_eq!(b.center_update_count(), 2);

        let mut b = Ball::new(BallId(0), pt(&[0.5, -3.0]), 1.0, A, 0);
        b.adjust_center(&pt(&[0.5, -3.0]), CenterCounter::UpdateCount)
            .unwrap();
        assert_eq!(b.center().to_dense(), vec![0.5, -3.0]);

        // batch mean of {0, 2, 4} is 2
        let mut b = Ball::new(BallId(0), pt(&[0.0, 0.0]), 1.0, A, 0);
        b.adjust_center(&pt(&[2.0, 0.0]), CenterCounter::UpdateCount)
            .unwrap();
        assert_eq!(b.center().to_dense(), vec![1.0, 0.0]);
        b.adjust_center(&pt(&[4.0, 0.0]), CenterCounter::UpdateCount)
            .unwrap();
        assert_eq!(b.center().to_dense(), vec![2.0, 0.0]);

        // total-count divisor: the current point is counted afterwards
        let mut b = Ball::new(BallId(0), pt(&[0.0, 0.0]), 1.0, A, 0);
        b.adjust_center(&pt(&[2.0, 0.0]), CenterCounter::TotalCount)
            .unwrap();
        b.update_counts(A);
        assert_eq!(b.center().to_dense(), vec![1.0, 0.0]);
        assert_eq!(b.total_count(), 2);

        assert!(b
            .adjust_center(&pt(&[1.0]), CenterCounter::UpdateCount)
            .is_err());
    }

    #[test]
    fn model_adjust_reindexes() {
        let mut m = BallModel::new(Metric::Euclidean, IndexKind::CoverTree);
        let a = m.add_ball(pt(&[0.0, 0.0]), 1.0, A, 1).unwrap();
        let b = m.add_ball(pt(&[3.0, 0.0]), 1.0, B, 2).unwrap();
        assert_eq!(m.nearest(&pt(&[1.4, 0.0])).unwrap().unwrap().0, a);
        m.adjust_center(a, &pt(&[-2.0, 0.0]), CenterCounter::UpdateCount)
            .unwrap();
        assert_eq!(m.nearest(&pt(&[1.4, 0.0])).unwrap().unwrap().0, b);
        assert_eq!(m.ball(a).unwrap().center().to_dense(), vec![-1.0, 0.0]);
        m.remove_ball(b).unwrap();
        assert_eq!(m.nearest(&pt(&[3.0, 0.0])).unwrap().unwrap().0, a);
        assert_eq!(m.remove_ball(b), Err(ModelError::UnknownBall(b)));
    }

    #[test]
    fn dump_is_line_delimited_json() {
        let mut m = BallModel::new(Metric::Euclidean, IndexKind::CoverTree);
        let a = m.add_ball(pt(&[0.0, 1.0]), 0.5, A, 1).unwrap();
        m.update_counts(a, B).unwrap();
        m.record_mistake(a).unwrap();
        m.add_ball(pt(&[2.0, 1.0]), 0.25, B, 2).unwrap();
        let mut buf = Vec::new();
        m.dump_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let recs: Vec<BallRecord> = text
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].center, vec![0.0, 1.0]);
        assert_eq!(recs[0].radius, 0.5);
        assert_eq!(recs[0].class_counts, vec![(0, 1), (1, 1)]);
        assert_eq!(recs[0].mistake_count, 1);
        assert_eq!(recs[1].total_count, 1);
    }

    proptest! {
        #[test]
        fn incremental_mean_equals_batch_mean(
            init in prop::collection::vec(-5.0..5.0f64, 3),
            pts in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 3), 0..100),
        ) {
            let mut b = Ball::new(BallId(0), pt(&init), 1.0, A, 0);
            for p in &pts {
                b.adjust_center(&pt(p), CenterCounter::UpdateCount).unwrap();
            }
            let n = pts.len() as f64 + 1.0;
            for i in 0..3 {
                let mean = (init[i] + pts.iter().map(|p| p[i]).sum::<f64>()) / n;
                prop_assert!((b.center().get(i) - mean).abs() < 1e-9);
            }
        }

        #[test]
        fn counts_sum_to_updates(labels in prop::collection::vec(0u32..6, 1..200)) {
            let mut b = Ball::new(BallId(0), pt(&[0.0]), 1.0, Label(labels[0]), 0);
            for &y in &labels[1..] {
                b.update_counts(Label(y));
            }
            let sum: u64 = (0..6).map(|y| b.count(Label(y))).sum();
            prop_assert_eq!(sum, labels.len() as u64);
            prop_assert_eq!(b.total_count(), labels.len() as u64);
        }

        #[test]
        fn majority_is_scale_invariant(
            labels in prop::collection::vec(0u32..4, 1..50),
            k in 1u64..5,
        ) {
            let reg = registry(&[Label(2), Label(0), Label(3), Label(1)]);
            let mut b = Ball::new(BallId(0), pt(&[0.0]), 1.0, Label(labels[0]), 0);
            for &y in &labels[1..] {
                b.update_counts(Label(y));
            }
            let mut scaled = Ball::new(BallId(0), pt(&[0.0]), 1.0, Label(labels[0]), 0);
            for _ in 1..k {
                scaled.update_counts(Label(labels[0]));
            }
            for &y in &labels[1..] {
                for _ in 0..k {
                    scaled.update_counts(Label(y));
                }
            }
            prop_assert_eq!(b.majority_predict(&reg).unwrap(), scaled.majority_predict(&reg).unwrap());
        }
    }
}
