//! Sample-quality metrics for the mixture benchmarks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::batch::{euclidean, SampleBatch};
use crate::datasets::MixtureSpec;
use crate::energy::eieg_estimate;
use crate::error::{Error, Result};
use crate::kernels::RadialKernel;
use crate::trainer::Snapshot;

pub const DEFAULT_THRESHOLD_SIGMAS: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub modes_total: usize,
    pub modes_hit: usize,
    pub high_quality_fraction: f64,
    /// Samples whose nearest center is each mode.
    pub per_mode_counts: Vec<usize>,
    /// Of those, the ones within the threshold.
    pub per_mode_high_quality: Vec<usize>,
    pub threshold_sigmas: f64,
}

/// Assigns each sample to its nearest center. A sample is high quality when
/// it lies within `threshold_sigmas * std` of that center, and a mode is hit
/// when it receives at least one high-quality sample.
pub fn mode_coverage(
    samples: &SampleBatch,
    spec: &MixtureSpec,
    threshold_sigmas: f64,
) -> Result<CoverageReport> {
    spec.validate()?;
    samples.ensure_dim(spec.dim())?;
    let radius = threshold_sigmas * spec.std;
    let k = spec.num_components();
    let mut counts = vec![0usize; k];
    let mut good = vec![0usize; k];
    for s in samples.iter_rows() {
        let (best, dist) = spec
            .centers
            .iter()
            .enumerate()
            .map(|(i, c)| (i, euclidean(s, c)))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        counts[best] += 1;
        if dist <= radius {
            good[best] += 1;
        }
    }
    let total_good: usize = good.iter().sum();
    Ok(CoverageReport {
        modes_total: k,
        modes_hit: good.iter().filter(|&&g| g > 0).count(),
        high_quality_fraction: total_good as f64 / samples.rows() as f64,
        per_mode_counts: counts,
        per_mode_high_quality: good,
        threshold_sigmas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridExtent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl GridExtent {
    pub fn square(half_width: f64) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
        }
    }

    pub fn shifted(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            x_max: self.x_max + dx,
            y_min: self.y_min + dy,
            y_max: self.y_max + dy,
        }
    }
}

/// Densities at cell centres, `ny` rows of `nx` columns, row 0 at `y_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeGrid {
    pub nx: usize,
    pub ny: usize,
    pub extent: GridExtent,
    pub bandwidth: f64,
    pub values: Vec<f64>,
}

impl KdeGrid {
    pub fn cell_area(&self) -> f64 {
        (self.extent.x_max - self.extent.x_min) / self.nx as f64
            * ((self.extent.y_max - self.extent.y_min) / self.ny as f64)
    }

    pub fn x_center(&self, i: usize) -> f64 {
        let dx = (self.extent.x_max - self.extent.x_min) / self.nx as f64;
        self.extent.x_min + (i as f64 + 0.5) * dx
    }

    pub fn y_center(&self, j: usize) -> f64 {
        let dy = (self.extent.y_max - self.extent.y_min) / self.ny as f64;
        self.extent.y_min + (j as f64 + 0.5) * dy
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Riemann-sum mass.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn argmax(&self) -> (usize, usize) {
        let (idx, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        (idx % self.nx, idx / self.nx)
    }
}

/// Silverman's rule for a 2D isotropic Gaussian kernel, `sigma n^(-1/6)`,
/// with `sigma` the mean of the per-axis standard deviations.
pub fn silverman_bandwidth(samples: &SampleBatch) -> f64 {
    let n = samples.rows() as f64;
    let d = samples.dim();
    let mean = samples.centroid();
    let mut sigma = 0.0;
    for k in 0..d {
        let var = samples
            .iter_rows()
            .map(|r| (r[k] - mean[k]).powi(2))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        sigma += var.sqrt();
    }
    sigma /= d as f64;
    let h = sigma * n.powf(-1.0 / (d as f64 + 4.0));
    if h > 0.0 {
        h
    } else {
        1.0
    }
}

/// Gaussian KDE of 2D samples on a regular grid of cell centres.
pub fn kde_grid(
    samples: &SampleBatch,
    bandwidth: f64,
    extent: GridExtent,
    resolution: (usize, usize),
) -> Result<KdeGrid> {
    samples.ensure_dim(2)?;
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "KDE bandwidth must be positive, got {bandwidth}"
        )));
    }
    let (nx, ny) = resolution;
    if nx == 0 || ny == 0 || !(extent.x_max > extent.x_min && extent.y_max > extent.y_min) {
        return Err(Error::InvalidConfig("degenerate KDE grid".into()));
    }
    let mut grid = KdeGrid {
        nx,
        ny,
        extent,
        bandwidth,
        values: vec![0.0; nx * ny],
    };
    let norm = 1.0 / (2.0 * PI * bandwidth * bandwidth * samples.rows() as f64);
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    for j in 0..ny {
        let y = grid.y_center(j);
        for i in 0..nx {
            let x = grid.x_center(i);
            let mut acc = 0.0;
            for s in samples.iter_rows() {
                let d2 = (x - s[0]).powi(2) + (y - s[1]).powi(2);
                acc += (-d2 * inv).exp();
            }
            grid.values[j * nx + i] = acc * norm;
        }
    }
    Ok(grid)
}

/// `(step, estimate(data_ref, snapshot))` for every recorded snapshot.
pub fn energy_trace<K: RadialKernel + ?Sized>(
    snapshots: &[Snapshot],
    data_ref: &SampleBatch,
    kernel: &K,
) -> Result<Vec<(usize, f64)>> {
    snapshots
        .iter()
        .map(|s| Ok((s.step, eieg_estimate(data_ref, &s.samples, kernel)?)))
        .collect()
}
