//! Seeded synthetic streams.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ball::Label;
use crate::ingest::Example;
use crate::metric::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthKind {
    /// Uniform points in `[0,1]^dim`, label `1{x₀ > 0.5}`.
    UniformThreshold { dim: usize },
    /// Two interleaved half circles with Gaussian jitter, squeezed into the
    /// unit square.
    TwoMoonsLike { spread: f64 },
    /// Uniform points labelled by a hyperplane through the cube center whose
    /// normal turns by `angular_rate` radians per step.
    RotatingHyperplane { dim: usize, angular_rate: f64 },
    /// `classes` Gaussian blobs on a circle; class `k` (zero-based) first
    /// shows up at step `⌈k·n/classes⌉ + 1`.
    MulticlassBlobs { classes: usize, spread: f64 },
}

impl SynthKind {
    pub const NAMES: [&'static str; 4] = [
        "uniform_threshold",
        "two_moons_like",
        "rotating_hyperplane",
        "multiclass_blobs",
    ];

    /// The generator called `name` with default parameters.
    pub fn by_name(name: &str) -> Option<Self> {
        Some(match name {
            "uniform_threshold" => SynthKind::UniformThreshold { dim: 1 },
            "two_moons_like" => SynthKind::TwoMoonsLike { spread: 0.1 },
            "rotating_hyperplane" => SynthKind::RotatingHyperplane {
                dim: 4,
                angular_rate: 1e-4,
            },
            "multiclass_blobs" => SynthKind::MulticlassBlobs {
                classes: 5,
                spread: 0.04,
            },
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SynthKind::UniformThreshold { .. } => "uniform_threshold",
            SynthKind::TwoMoonsLike { .. } => "two_moons_like",
            SynthKind::RotatingHyperplane { .. } => "rotating_hyperplane",
            SynthKind::MulticlassBlobs { .. } => "multiclass_blobs",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SynthKind::UniformThreshold { dim } | SynthKind::RotatingHyperplane { dim, .. } => *dim,
            SynthKind::TwoMoonsLike { .. } | SynthKind::MulticlassBlobs { .. } => 2,
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            SynthKind::UniformThreshold { dim } if *dim == 0 => Err("dim must be positive".into()),
            SynthKind::RotatingHyperplane { dim, .. } if *dim < 2 => {
                Err("rotating_hyperplane needs dim ≥ 2".into())
            }
            SynthKind::RotatingHyperplane { angular_rate, .. } if !angular_rate.is_finite() => {
                Err("angular rate must be finite".into())
            }
            SynthKind::MulticlassBlobs { classes, .. } if *classes == 0 => {
                Err("need at least one class".into())
            }
            SynthKind::TwoMoonsLike { spread } | SynthKind::MulticlassBlobs { spread, .. }
                if !(*spread >= 0.0 && spread.is_finite()) =>
            {
                Err("spread must be nonnegative".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    #[serde(flatten)]
    pub kind: SynthKind,
    pub seed: u64,
    /// Label flip probability.
    pub noise: f64,
}

impl Generator {
    pub fn new(kind: SynthKind, seed: u64, noise: f64) -> Self {
        Generator { kind, seed, noise }
    }

    /// The first `n` examples of the stream.
    pub fn stream(&self, n: u64) -> Result<SynthStream, String> {
        self.kind.validate()?;
        if !(0.0..0.5).contains(&self.noise) {
            return Err(format!("noise must lie in [0, 0.5), got {}", self.noise));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let plane = match self.kind {
            SynthKind::RotatingHyperplane { dim, .. } => Some(random_plane(&mut rng, dim)),
            _ => None,
        };
        Ok(SynthStream {
            gen: self.clone(),
            n,
            t: 0,
            rng,
            plane,
        })
    }
}

/// Orthonormal pair spanning the rotation plane.
fn random_plane(rng: &mut ChaCha8Rng, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut draw = || -> Vec<f64> { (0..dim).map(|_| StandardNormal.sample(rng)).collect() };
    loop {
        let mut u = draw();
        let mut v = draw();
        let nu = dot(&u, &u).sqrt();
        if nu < 1e-9 {
            continue;
        }
        u.iter_mut().for_each(|a| *a /= nu);
        let p = dot(&u, &v);
        v.iter_mut().zip(&u).for_each(|(b, a)| *b -= p * a);
        let nv = dot(&v, &v).sqrt();
        if nv < 1e-9 {
            continue;
        }
        v.iter_mut().for_each(|b| *b /= nv);
        return (u, v);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Iterator over generated examples. Steps are counted from 1.
#[derive(Debug, Clone)]
pub struct SynthStream {
    gen: Generator,
    n: u64,
    t: u64,
    rng: ChaCha8Rng,
    plane: Option<(Vec<f64>, Vec<f64>)>,
}

impl SynthStream {
    /// Normal of the labelling hyperplane at step `t` (rotating_hyperplane
    /// only).
    pub fn boundary_normal(&self, t: u64) -> Option<Vec<f64>> {
        let (u, v) = self.plane.as_ref()?;
        let SynthKind::RotatingHyperplane { angular_rate, .. } = self.gen.kind else {
            return None;
        };
        let (s, c) = (angular_rate * t as f64).sin_cos();
        Some(u.iter().zip(v).map(|(a, b)| c * a + s * b).collect())
    }

    /// Step at which zero-based class `k` of multiclass_blobs first appears.
    pub fn first_appearance(k: usize, classes: usize, n: u64) -> u64 {
        (k as u64 * n).div_ceil(classes as u64) + 1
    }

    fn flip_binary(&mut self, y: u32) -> u32 {
        if self.rng.random::<f64>() < self.gen.noise {
            1 - y
        } else {
            y
        }
    }

    fn uniform_point(&mut self, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| self.rng.random::<f64>()).collect()
    }

    fn next_example(&mut self) -> (Vec<f64>, u32) {
        let t = self.t;
        match self.gen.kind.clone() {
            SynthKind::UniformThreshold { dim } => {
                let x = self.uniform_point(dim);
                let y = u32::from(x[0] > 0.5);
                (x, self.flip_binary(y))
            }
            SynthKind::TwoMoonsLike { spread } => {
                let y = u32::from(self.rng.random::<bool>());
                let a = self.rng.random::<f64>() * PI;
                let (mut px, mut py) = if y == 0 {
                    (a.cos(), a.sin())
                } else {
                    (1.0 - a.cos(), 0.5 - a.sin())
                };
                let jitter = Normal::new(0.0, spread).expect("validated spread");
                px += jitter.sample(&mut self.rng);
                py += jitter.sample(&mut self.rng);
                // raw moons span [-1, 2] × [-0.5, 1]
                let x = vec![
                    ((px + 1.25) / 3.5).clamp(0.0, 1.0),
                    ((py + 0.75) / 2.0).clamp(0.0, 1.0),
                ];
                (x, self.flip_binary(y))
            }
            SynthKind::RotatingHyperplane { dim, .. } => {
                let x = self.uniform_point(dim);
                let w = self
                    .boundary_normal(t)
                    .expect("plane drawn at construction");
                let side: f64 = x.iter().zip(&w).map(|(xi, wi)| (xi - 0.5) * wi).sum();
                (x, self.flip_binary(u32::from(side >= 0.0)))
            }
            SynthKind::MulticlassBlobs { classes, spread } => {
                let available = (0..classes)
                    .take_while(|&k| Self::first_appearance(k, classes, self.n) <= t)
                    .count()
                    .max(1);
                let debut = (0..classes).find(|&k| Self::first_appearance(k, classes, self.n) == t);
                let k = debut.unwrap_or_else(|| self.rng.random_range(0..available));
                let angle = 2.0 * PI * k as f64 / classes as f64;
                let jitter = Normal::new(0.0, spread).expect("validated spread");
                let x = vec![
                    (0.5 + 0.35 * angle.cos() + jitter.sample(&mut self.rng)).clamp(0.0, 1.0),
                    (0.5 + 0.35 * angle.sin() + jitter.sample(&mut self.rng)).clamp(0.0, 1.0),
                ];
                let mut y = k as u32;
                if debut.is_none() && available > 1 && self.rng.random::<f64>() < self.gen.noise {
                    let other = self.rng.random_range(0..available - 1) as u32;
                    y = if other >= y { other + 1 } else { other };
                }
                (x, y)
            }
        }
    }
}

impl Iterator for SynthStream {
    type Item = Example;

    fn next(&mut self) -> Option<Example> {
        if self.t >= self.n {
            return None;
        }
        self.t += 1;
        let (x, y) = self.next_example();
        let x = FeatureVector::dense(x).expect("generated points are finite and nonempty");
        Some((x, Label(y)))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.n - self.t) as usize;
        (left, Some(left))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all(kind: SynthKind, seed: u64, noise: f64, n: u64) -> Vec<Example> {
        Generator::new(kind, seed, noise)
            .stream(n)
            .unwrap()
            .collect()
    }

    fn kinds() -> Vec<SynthKind> {
        SynthKind::NAMES
            .iter()
            .map(|n| SynthKind::by_name(n).unwrap())
            .collect()
    }

    #[test]
    fn names_round_trip() {
        for k in kinds() {
            assert_eq!(SynthKind::by_name(k.name()), Some(k));
        }
        assert_eq!(SynthKind::by_name("banana"), None);
    }

    #[test]
    fn same_seed_same_stream_other_seed_differs() {
        for k in kinds() {
            let a = all(k.clone(), 11, 0.1, 100);
            assert_eq!(a, all(k.clone(), 11, 0.1, 100));
            assert_ne!(a, all(k.clone(), 12, 0.1, 100), "{}", k.name());
            assert_eq!(a.len(), 100);
        }
    }

    #[test]
    fn points_stay_in_unit_cube() {
        for k in kinds() {
            for (x, _) in all(k.clone(), 3, 0.0, 2000) {
                assert_eq!(x.dim(), k.dim());
                assert!(x.to_dense().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn threshold_labels_without_noise() {
        for (x, y) in all(SynthKind::UniformThreshold { dim: 3 }, 5, 0.0, 5000) {
            assert_eq!(y.0, u32::from(x.get(0) > 0.5));
        }
    }

    #[test]
    fn noise_rate_matches() {
        let n = 100_000;
        for noise in [0.1, 0.3] {
            let flips = all(SynthKind::UniformThreshold { dim: 1 }, 8, noise, n)
                .iter()
                .filter(|(x, y)| y.0 != u32::from(x.get(0) > 0.5))
                .count();
            assert!((flips as f64 / n as f64 - noise).abs() < 0.02);
        }
    }

    #[test]
    fn blob_schedule() {
        let kind = SynthKind::MulticlassBlobs {
            classes: 3,
            spread: 0.05,
        };
        let s = all(kind, 1, 0.2, 300);
        let first: Vec<usize> = (0..3)
            .map(|k| s.iter().position(|(_, y)| y.0 == k).unwrap() + 1)
            .collect();
        assert_eq!(first, vec![1, 101, 201]);
        assert_eq!(SynthStream::first_appearance(2, 3, 300), 201);
        assert_eq!(SynthStream::first_appearance(1, 3, 10), 5);
    }

    #[test]
    fn still_hyperplane_is_stationary() {
        let g = Generator::new(
            SynthKind::RotatingHyperplane {
                dim: 3,
                angular_rate: 0.0,
            },
            4,
            0.0,
        );
        let s = g.stream(3000).unwrap();
        let w = s.boundary_normal(0).unwrap();
        assert_eq!(s.boundary_normal(2999).unwrap(), w);
        assert!((dot(&w, &w) - 1.0).abs() < 1e-12);
        for (x, y) in s {
            let side: f64 = x
                .to_dense()
                .iter()
                .zip(&w)
                .map(|(a, b)| (a - 0.5) * b)
                .sum();
            assert_eq!(y.0, u32::from(side >= 0.0));
        }
    }

    #[test]
    fn hyperplane_normal_rotates() {
        let g = Generator::new(
            SynthKind::RotatingHyperplane {
                dim: 4,
                angular_rate: 0.01,
            },
            4,
            0.0,
        );
        let s = g.stream(10).unwrap();
        let a = s.boundary_normal(0).unwrap();
        let b = s.boundary_normal(100).unwrap();
        assert!((dot(&a, &b) - 1f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters() {
        assert!(
            Generator::new(SynthKind::UniformThreshold { dim: 1 }, 0, 0.5)
                .stream(1)
                .is_err()
        );
        assert!(Generator::new(
            SynthKind::RotatingHyperplane {
                dim: 1,
                angular_rate: 0.0
            },
            0,
            0.0
        )
        .stream(1)
        .is_err());
    }
}
