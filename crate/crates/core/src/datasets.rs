//! Seeded Gaussian-mixture samplers for the 2D toy benchmarks.
//!
//! Geometry of the eight-Gaussian ring (radius 2, std 0.02) and the 5x5
//! grid (spacing 2, std 0.05) follows the usual toy-GAN conventions; both are
//! plain data and can be overridden through [`MixtureSpec`].

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Isotropic Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    pub centers: Vec<Vec<f64>>,
    pub std: f64,
    pub weights: Vec<f64>,
}

/// Anything that can hand out i.i.d. batches of a fixed dimension.
pub trait DataSampler {
    fn dim(&self) -> usize;
    fn sample_batch(&self, n: usize, rng: &mut SeededRng) -> SampleBatch;
}

impl MixtureSpec {
    pub fn new(centers: Vec<Vec<f64>>, std: f64, weights: Vec<f64>) -> Result<Self> {
        let spec = Self {
            centers,
            std,
            weights,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .centers
            .first()
            .ok_or(Error::Empty("mixture needs at least one center"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::InvalidConfig("mixture centers must be non-empty".into()));
        }
        if self.centers.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidConfig("mixture centers differ in dimension".into()));
        }
        if self.centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("mixture centers must be finite".into()));
        }
        if !(self.std > 0.0 && self.std.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "component std must be positive, got {}",
                self.std
            )));
        }
        if self.weights.len() != self.centers.len() {
            return Err(Error::InvalidConfig(format!(
                "{} weights for {} centers",
                self.weights.len(),
                self.centers.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidConfig("mixture weights must be >= 0".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn num_components(&self) -> usize {
        self.centers.len()
    }

    /// `0.2 N((-5,-5), I) + 0.8 N((5,5), I)`.
    pub fn two_mode() -> Self {
        Self {
            centers: vec![vec![-5.0, -5.0], vec![5.0, 5.0]],
            std: 1.0,
            weights: vec![0.2, 0.8],
        }
    }

    pub fn ring8() -> Self {
        Self::ring(8, 2.0, 0.02)
    }

    pub fn ring(count: usize, radius: f64, std: f64) -> Self {
        let centers = (0..count)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / count as f64;
                vec![radius * a.cos(), radius * a.sin()]
            })
            .collect();
        Self {
            centers,
            std,
            weights: vec![1.0 / count as f64; count],
        }
    }

    pub fn grid25() -> Self {
        Self::grid(5, 2.0, 0.05)
    }

    /// `side x side` lattice centred at the origin.
    pub fn grid(side: usize, spacing: f64, std: f64) -> Self {
        let half = (side as f64 - 1.0) / 2.0;
        let mut centers = Vec::with_capacity(side * side);
        for i in 0..side {
            for j in 0..side {
                centers.push(vec![
                    (i as f64 - half) * spacing,
                    (j as f64 - half) * spacing,
                ]);
            }
        }
        let n = centers.len();
        Self {
            centers,
            std,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Draws a component index by inverting the cumulative weights.
    pub fn draw_component(&self, rng: &mut SeededRng) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }

    /// Samples `n` points and returns them with their component labels.
    pub fn sample_labeled(&self, n: usize, rng: &mut SeededRng) -> (SampleBatch, Vec<usize>) {
        let dim = self.dim();
        let mut data = Vec::with_capacity(n * dim);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = self.draw_component(rng);
            labels.push(c);
            for &mu in &self.centers[c] {
                data.push(mu + self.std * rng.normal());
            }
        }
        (SampleBatch::from_vec_unchecked(n, dim, data), labels)
    }
}

impl DataSampler for MixtureSpec {
    fn dim(&self) -> usize {
        MixtureSpec::dim(self)
    }

    fn sample_batch(&self, n: usize, rng: &mut SeededRng) -> SampleBatch {
        self.sample_labeled(n, rng).0
    }
}

/// `n` i.i.d. points from the mixture.
pub fn sample(spec: &MixtureSpec, n: usize, rng: &mut SeededRng) -> Result<SampleBatch> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Empty("requested zero samples"));
    }
    Ok(spec.sample_labeled(n, rng).0)
}

/// `n x dim` standard normal noise.
pub fn standard_normal(n: usize, dim: usize, rng: &mut SeededRng) -> SampleBatch {
    let mut data = vec![0.0; n * dim];
    rng.fill_normal(&mut data);
    SampleBatch::from_vec_unchecked(n, dim, data)
}
