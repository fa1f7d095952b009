//! Feature vectors and the distance used to compare them.
//!
//! A [`FeatureVector`] is either dense (every coordinate stored) or sparse
//! (only nonzero coordinates stored, as in LIBSVM files). Both share one
//! interface and can be mixed freely in distance computations.
//!
//! Sparse indices are zero-based in memory. The one-based convention of
//! LIBSVM text is handled by the parser in [`crate::ingest`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("non-finite coordinate {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("sparse index {index} is out of order or outside dimension {dim}")]
    BadSparseIndex { index: usize, dim: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Coords {
    Dense(Vec<f64>),
    Sparse {
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// A point of the input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    dim: usize,
    coords: Coords,
}

impl FeatureVector {
    pub fn dense(values: Vec<f64>) -> Result<Self, MetricError> {
        if values.is_empty() {
            return Err(MetricError::ZeroDimension);
        }
        check_finite(values.iter().copied().enumerate())?;
        Ok(FeatureVector {
            dim: values.len(),
            coords: Coords::Dense(values),
        })
    }

    /// Builds a sparse vector from zero-based `(index, value)` pairs, which
    /// must be strictly increasing in index and lie below `dim`.
    pub fn sparse(dim: usize, pairs: Vec<(usize, f64)>) -> Result<Self, MetricError> {
        if dim == 0 {
            return Err(MetricError::ZeroDimension);
        }
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        for (i, v) in pairs {
            if i >= dim || indices.last().is_some_and(|&last| i <= last) {
                return Err(MetricError::BadSparseIndex { index: i, dim });
            }
            if !v.is_finite() {
                return Err(MetricError::NonFinite { index: i, value: v });
            }
            indices.push(i);
            values.push(v);
        }
        Ok(FeatureVector {
            dim,
            coords: Coords::Sparse { indices, values },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.coords, Coords::Sparse { .. })
    }

    /// Coordinate `i` (zero-based); zero for absent sparse entries.
    pub fn get(&self, i: usize) -> f64 {
        match &self.coords {
            Coords::Dense(v) => v.get(i).copied().unwrap_or(0.0),
            Coords::Sparse { indices, values } => {
                indices.binary_search(&i).map(|k| values[k]).unwrap_or(0.0)
            }
        }
    }

    /// Iterates over `(index, value)` pairs that may be nonzero.
    pub fn iter_nonzero(&self) -> Box<dyn Iterator<Item = (usize, f64)> + '_> {
        match &self.coords {
            Coords::Dense(v) => Box::new(v.iter().copied().enumerate().filter(|(_, x)| *x != 0.0)),
            Coords::Sparse { indices, values } => {
                Box::new(indices.iter().copied().zip(values.iter().copied()))
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match &self.coords {
            Coords::Dense(v) => v.clone(),
            Coords::Sparse { indices, values } => {
                let mut out = vec![0.0; self.dim];
                for (&i, &v) in indices.iter().zip(values) {
                    out[i] = v;
                }
                out
            }
        }
    }

    /// Widens a sparse vector to a larger ambient dimension.
    pub fn with_dimension(mut self, dim: usize) -> Result<Self, MetricError> {
        match &self.coords {
            Coords::Dense(_) if dim != self.dim => Err(MetricError::DimensionMismatch {
                left: self.dim,
                right: dim,
            }),
            Coords::Sparse { indices, .. } if indices.last().is_some_and(|&i| i >= dim) => {
                Err(MetricError::BadSparseIndex {
                    index: *indices.last().unwrap(),
                    dim,
                })
            }
            _ if dim == 0 => Err(MetricError::ZeroDimension),
            _ => {
                self.dim = dim;
                Ok(self)
            }
        }
    }

    pub fn norm(&self) -> f64 {
        let sq: f64 = match &self.coords {
            Coords::Dense(v) => v.iter().map(|x| x * x).sum(),
            Coords::Sparse { values, .. } => values.iter().map(|x| x * x).sum(),
        };
        sq.sqrt()
    }

    fn scaled(&self, s: f64) -> FeatureVector {
        let coords = match &self.coords {
            Coords::Dense(v) => Coords::Dense(v.iter().map(|x| x * s).collect()),
            Coords::Sparse { indices, values } => Coords::Sparse {
                indices: indices.clone(),
                values: values.iter().map(|x| x * s).collect(),
            },
        };
        FeatureVector {
            dim: self.dim,
            coords,
        }
    }

    /// In-place `self += (target - self) * step`.
    ///
    /// Sparse stays sparse only when both operands are sparse.
    pub fn move_toward(&mut self, target: &FeatureVector, step: f64) -> Result<(), MetricError> {
        check_dims(self, target)?;
        match (&mut self.coords, &target.coords) {
            (Coords::Dense(c), Coords::Dense(t)) => {
                for (ci, ti) in c.iter_mut().zip(t) {
                    *ci += (ti - *ci) * step;
                }
            }
            (Coords::Dense(c), Coords::Sparse { .. }) => {
                let t = target.to_dense();
                for (ci, ti) in c.iter_mut().zip(&t) {
                    *ci += (ti - *ci) * step;
                }
            }
            (Coords::Sparse { .. }, Coords::Dense(_)) => {
                let mut c = self.to_dense();
                for (i, ci) in c.iter_mut().enumerate() {
                    *ci += (target.get(i) - *ci) * step;
                }
                self.coords = Coords::Dense(c);
            }
            (
                Coords::Sparse {
                    indices: ci,
                    values: cv,
                },
                Coords::Sparse {
                    indices: ti,
                    values: tv,
                },
            ) => {
                let mut indices = Vec::with_capacity(ci.len().max(ti.len()));
                let mut values = Vec::with_capacity(indices.capacity());
                let (mut a, mut b) = (0, 0);
                while a < ci.len() || b < ti.len() {
                    let (i, c, t) = match (ci.get(a), ti.get(b)) {
                        (Some(&ia), Some(&ib)) if ia == ib => {
                            a += 1;
                            b += 1;
                            (ia, cv[a - 1], tv[b - 1])
                        }
                        (Some(&ia), Some(&ib)) if ia < ib => {
                            a += 1;
                            (ia, cv[a - 1], 0.0)
                        }
                        (Some(&ia), None) => {
                            a += 1;
                            (ia, cv[a - 1], 0.0)
                        }
                        (_, Some(&ib)) => {
                            b += 1;
                            (ib, 0.0, tv[b - 1])
                        }
                        (None, None) => unreachable!(),
                    };
                    let v = c + (t - c) * step;
                    if v != 0.0 {
                        indices.push(i);
                        values.push(v);
                    }
                }
                self.coords = Coords::Sparse { indices, values };
            }
        }
        Ok(())
    }
}

fn check_finite(it: impl Iterator<Item = (usize, f64)>) -> Result<(), MetricError> {
    for (index, value) in it {
        if !value.is_finite() {
            return Err(MetricError::NonFinite { index, value });
        }
    }
    Ok(())
}

fn check_dims(a: &FeatureVector, b: &FeatureVector) -> Result<(), MetricError> {
    if a.dim != b.dim {
        return Err(MetricError::DimensionMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    Ok(())
}

/// Returns `v / ‖v‖₂`.
pub fn normalize_unit(v: &FeatureVector) -> Result<FeatureVector, MetricError> {
    let n = v.norm();
    if n == 0.0 {
        return Err(MetricError::ZeroVector);
    }
    Ok(v.scaled(1.0 / n))
}

/// The distance function of the input space.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[non_exhaustive]
pub enum Metric {
    #[default]
    Euclidean,
}

impl Metric {
    pub fn distance(&self, a: &FeatureVector, b: &FeatureVector) -> Result<f64, MetricError> {
        check_dims(a, b)?;
        Ok(self.distance_unchecked(a, b))
    }

    /// Same as [`Metric::distance`] for operands already known to share a
    /// dimension.
    pub(crate) fn distance_unchecked(&self, a: &FeatureVector, b: &FeatureVector) -> f64 {
        debug_assert_eq!(a.dim, b.dim);
        match self {
            Metric::Euclidean => squared_l2(a, b).sqrt(),
        }
    }
}

fn squared_l2(a: &FeatureVector, b: &FeatureVector) -> f64 {
    match (&a.coords, &b.coords) {
        (Coords::Dense(x), Coords::Dense(y)) => x
            .iter()
            .zip(y)
            .map(|(p, q)| {
                let d = p - q;
                d * d
            })
            .sum(),
        (Coords::Dense(x), Coords::Sparse { indices, values })
        | (Coords::Sparse { indices, values }, Coords::Dense(x)) => {
            let mut k = 0;
            let mut sum = 0.0;
            for (i, p) in x.iter().enumerate() {
                let d = if indices.get(k) == Some(&i) {
                    k += 1;
                    p - values[k - 1]
                } else {
                    *p
                };
                sum += d * d;
            }
            sum
        }
        (
            Coords::Sparse {
                indices: ia,
                values: va,
            },
            Coords::Sparse {
                indices: ib,
                values: vb,
            },
        ) => {
            let (mut i, mut j, mut sum) = (0, 0, 0.0);
            while i < ia.len() && j < ib.len() {
                if ia[i] == ib[j] {
                    let d = va[i] - vb[j];
                    sum += d * d;
                    i += 1;
                    j += 1;
                } else if ia[i] < ib[j] {
                    sum += va[i] * va[i];
                    i += 1;
                } else {
                    sum += vb[j] * vb[j];
                    j += 1;
                }
            }
            sum += va[i..].iter().map(|v| v * v).sum::<f64>();
            sum += vb[j..].iter().map(|v| v * v).sum::<f64>();
            sum
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(v: &[f64]) -> FeatureVector {
        FeatureVector::dense(v.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let m = Metric::Euclidean;
        assert_eq!(
            m.distance(&dense(&[0.0, 0.0]), &dense(&[3.0, 4.0]))
                .unwrap(),
            5.0
        );
        let x = dense(&[0.3, -1.2, 7.0]);
        assert_eq!(m.distance(&x, &x).unwrap(), 0.0);
        let s = FeatureVector::sparse(2, vec![(0, 1.0)]).unwrap();
        let d = m.distance(&s, &dense(&[0.0, 1.0])).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn distance_rejects_dimension_mismatch() {
        let err = Metric::Euclidean
            .distance(&dense(&[1.0]), &dense(&[1.0, 2.0]))
            .unwrap_err();
        assert_eq!(err, MetricError::DimensionMismatch { left: 1, right: 2 });
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_unit(&dense(&[3.0, 4.0])).unwrap();
        assert!((n.get(0) - 0.6).abs() < 1e-15 && (n.get(1) - 0.8).abs() < 1e-15);
        let n = normalize_unit(&dense(&[0.0, 5.0])).unwrap();
        assert_eq!(n.to_dense(), vec![0.0, 1.0]);
        let u = dense(&[0.0, 1.0, 0.0]);
        assert_eq!(normalize_unit(&u).unwrap(), u);
        assert_eq!(
            normalize_unit(&dense(&[0.0, 0.0])),
            Err(MetricError::ZeroVector)
        );
    }

    #[test]
    fn sparse_validation() {
        assert!(FeatureVector::sparse(3, vec![(2, 1.0), (1, 1.0)]).is_err());
        assert!(FeatureVector::sparse(3, vec![(1, 1.0), (1, 1.0)]).is_err());
        assert!(FeatureVector::sparse(3, vec![(3, 1.0)]).is_err());
        assert!(FeatureVector::sparse(3, vec![(0, f64::NAN)]).is_err());
        assert!(FeatureVector::dense(vec![f64::INFINITY]).is_err());
        assert!(FeatureVector::sparse(0, vec![]).is_err());
    }

    #[test]
    fn move_toward_mixed_representations() {
        let mut c = FeatureVector::sparse(3, vec![(0, 2.0)]).unwrap();
        c.move_toward(&FeatureVector::sparse(3, vec![(2, 4.0)]).unwrap(), 0.5)
            .unwrap();
        assert!(c.is_sparse());
        assert_eq!(c.to_dense(), vec![1.0, 0.0, 2.0]);
        c.move_toward(&dense(&[1.0, 2.0, 2.0]), 0.5).unwrap();
        assert!(!c.is_sparse());
        assert_eq!(c.to_dense(), vec![1.0, 1.0, 2.0]);
    }

    fn arb_vec(dim: usize) -> impl Strategy<Value = FeatureVector> {
        prop_oneof![
            prop::collection::vec(-10.0..10.0f64, dim)
                .prop_map(|v| FeatureVector::dense(v).unwrap()),
            prop::collection::vec(prop::option::of(-10.0..10.0f64), dim).prop_map(move |v| {
                let pairs = v
                    .into_iter()
                    .enumerate()
                    .filter_map(|(i, x)| x.map(|x| (i, x)))
                    .collect();
                FeatureVector::sparse(dim, pairs).unwrap()
            }),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn metric_axioms(a in arb_vec(4), b in arb_vec(4), c in arb_vec(4)) {
            let m = Metric::Euclidean;
            let ab = m.distance(&a, &b).unwrap();
            let bc = m.distance(&b, &c).unwrap();
            let ac = m.distance(&a, &c).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!(m.distance(&a, &a).unwrap().abs() < 1e-6);
            prop_assert!((ab - m.distance(&b, &a).unwrap()).abs() < 1e-9);
            prop_assert!(ac <= ab + bc + 1e-9);
        }
    }

    proptest! {
        #[test]
        fn normalization_is_idempotent_and_bounded(a in arb_vec(5), b in arb_vec(5)) {
            prop_assume!(a.norm() > 1e-6 && b.norm() > 1e-6);
            let na = normalize_unit(&a).unwrap();
            let nna = normalize_unit(&na).unwrap();
            prop_assert!((na.norm() - 1.0).abs() < 1e-12);
            for i in 0..5 {
                prop_assert!((na.get(i) - nna.get(i)).abs() < 1e-12);
            }
            let nb = normalize_unit(&b).unwrap();
            prop_assert!(Metric::Euclidean.distance(&na, &nb).unwrap() <= 2.0 + 1e-12);
        }

        #[test]
        fn mixed_distance_matches_dense(a in arb_vec(6), b in arb_vec(6)) {
            let da = FeatureVector::dense(a.to_dense()).unwrap();
            let db = FeatureVector::dense(b.to_dense()).unwrap();
            let m = Metric::Euclidean;
            prop_assert!((m.distance(&a, &b).unwrap() - m.distance(&da, &db).unwrap()).abs() < 1e-9);
        }
    }
}
