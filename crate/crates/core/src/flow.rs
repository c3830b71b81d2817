//! Interacting-particle sampler.
//!
//! Generated particles move under the capped pair force
//!
//! ```text
//! f(x, y) = (y - x) / r^(n+1)   if r >= R
//!         = (y - x) / R^(n+1)   if r <  R
//! ```
//!
//! attracted by a data batch with mobility `M1` and repelled by each other
//! with mobility `M2`, integrated with explicit Euler. A fresh data batch is
//! drawn every step.

use serde::{Deserialize, Serialize};

use crate::batch::{euclidean, SampleBatch};
use crate::datasets::{standard_normal, DataSampler};
use crate::energy::eieg_estimate;
use crate::error::{Error, Result};
use crate::kernels::{ElasticKernel, KernelConfig};
use crate::rng::{SeededRng, Stream};

pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub mobility_m1: f64,
    pub mobility_m2: f64,
    pub dt: f64,
    pub cutoff: f64,
    pub total_steps: usize,
    /// Data points per step.
    pub n1: usize,
    /// Number of particles.
    pub n2: usize,
    pub dim_n: u32,
    /// Energy is recorded every this many steps (and at the last step).
    pub record_every: usize,
    /// Particle positions are recorded every this many steps; 0 keeps only
    /// the initial and final states.
    pub snapshot_every: usize,
    /// Size of the fixed reference data batch used for energy recording.
    pub energy_ref_size: usize,
    /// A step moving any particle further than this logs a warning.
    pub warn_displacement: f64,
    pub seed: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            mobility_m1: 100.0,
            mobility_m2: 50.0,
            dt: 0.1,
            cutoff: 1.0,
            total_steps: 100_000,
            n1: 64,
            n2: 64,
            dim_n: 2,
            record_every: 100,
            snapshot_every: 0,
            energy_ref_size: 1024,
            warn_displacement: 1.0,
            seed: 0,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.mobility_m1 >= 0.0 && self.mobility_m2 >= 0.0) {
            return bad("mobilities must be >= 0");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !(self.cutoff > 0.0) {
            return bad("cutoff must be positive");
        }
        if self.n1 == 0 || self.n2 == 0 || self.energy_ref_size == 0 {
            return bad("batch sizes must be positive");
        }
        if self.dim_n < 1 {
            return bad("dim_n must be positive");
        }
        if self.record_every == 0 {
            return bad("record_every must be positive");
        }
        Ok(())
    }
}

/// Adds `scale * f(x, y)` into `out`.
#[inline]
fn accumulate_force(cfg: &FlowConfig, x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
    let r = euclidean(x, y);
    if r == 0.0 {
        return;
    }
    let p = cfg.dim_n as i32 + 1;
    let c = if r >= cfg.cutoff {
        scale * r.powi(-p)
    } else {
        scale * cfg.cutoff.powi(-p)
    };
    for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
        *o += c * (b - a);
    }
}

/// Force on `x` from `y`; zero at `x = y`.
pub fn pair_force(cfg: &FlowConfig, x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    accumulate_force(cfg, x, y, 1.0, &mut out);
    out
}

/// One explicit Euler step.
pub fn flow_step(cfg: &FlowConfig, particles: &SampleBatch, data: &SampleBatch) -> Result<SampleBatch> {
    particles.ensure_dim(data.dim())?;
    let attract = cfg.mobility_m1 / data.rows() as f64;
    let repel = cfg.mobility_m2 / particles.rows() as f64;
    let mut next = particles.clone();
    let mut velocity = vec![0.0; particles.dim()];
    for i in 0..particles.rows() {
        let xi = particles.row(i);
        velocity.iter_mut().for_each(|v| *v = 0.0);
        if attract != 0.0 {
            for yj in data.iter_rows() {
                accumulate_force(cfg, xi, yj, attract, &mut velocity);
            }
        }
        if repel != 0.0 {
            for xj in particles.iter_rows() {
                accumulate_force(cfg, xi, xj, -repel, &mut velocity);
            }
        }
        for (p, v) in next.row_mut(i).iter_mut().zip(&velocity) {
            *p += cfg.dt * v;
        }
    }
    if !next.is_finite() {
        return Err(Error::NonFinite {
            what: "particle positions".into(),
            step: 0,
        });
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRun {
    pub initial: SampleBatch,
    pub particles: SampleBatch,
    /// `(step, estimate(reference data, particles))`.
    pub energy: Vec<(usize, f64)>,
    pub snapshots: Vec<(usize, SampleBatch)>,
    pub max_displacement: f64,
}

impl FlowRun {
    pub fn energy_csv(&self) -> String {
        let mut s = String::from("step,energy\n");
        for (step, e) in &self.energy {
            s.push_str(&format!("{step},{e:?}\n"));
        }
        s
    }

    /// Columns `step,particle_id,x0..x{d-1}`.
    pub fn trajectory_csv(&self) -> String {
        let d = self.particles.dim();
        let mut s = String::from("step,particle_id");
        for k in 0..d {
            s.push_str(&format!(",x{k}"));
        }
        s.push('\n');
        for (step, batch) in &self.snapshots {
            for (i, row) in batch.iter_rows().enumerate() {
                s.push_str(&format!("{step},{i}"));
                for v in row {
                    s.push_str(&format!(",{v:?}"));
                }
                s.push('\n');
            }
        }
        s
    }
}

/// Initial particles: `n2` standard normal points from the seed's noise stream.
pub fn initial_particles(cfg: &FlowConfig, dim: usize) -> SampleBatch {
    standard_normal(cfg.n2, dim, &mut SeededRng::stream(cfg.seed, Stream::Noise))
}

/// Evolves `init` for `cfg.total_steps` steps, drawing a fresh data batch of
/// `n1` points per step.
pub fn run_flow(cfg: &FlowConfig, init: SampleBatch, sampler: &dyn DataSampler) -> Result<FlowRun> {
    cfg.validate()?;
    init.ensure_dim(sampler.dim())?;
    let mut data_rng = SeededRng::stream(cfg.seed, Stream::Data);
    let reference = sampler.sample_batch(
        cfg.energy_ref_size,
        &mut SeededRng::stream(cfg.seed, Stream::Eval),
    );
    let kernel = ElasticKernel::new(KernelConfig::new(cfg.dim_n.max(2), cfg.cutoff)?)?;

    let mut particles = init.clone();
    let mut energy = vec![(0, eieg_estimate(&reference, &particles, &kernel)?)];
    let mut snapshots = vec![(0, particles.clone())];
    let mut max_displacement = 0.0_f64;
    let mut warned = false;

    for step in 1..=cfg.total_steps {
        let data = sampler.sample_batch(cfg.n1, &mut data_rng);
        let next = flow_step(cfg, &particles, &data).map_err(|e| match e {
            Error::NonFinite { what, .. } => Error::NonFinite { what, step },
            other => other,
        })?;
        let disp = particles
            .iter_rows()
            .zip(next.iter_rows())
            .map(|(a, b)| euclidean(a, b))
            .fold(0.0_f64, f64::max);
        max_displacement = max_displacement.max(disp);
        if disp > cfg.warn_displacement && !warned {
            log::warn!(
                "step {step}: particle moved {disp:.3} in one step (warn threshold {})",
                cfg.warn_displacement
            );
            warned = true;
        }
        let magnitude = next.max_abs();
        if magnitude > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                step,
                magnitude,
                limit: DIVERGENCE_LIMIT,
            });
        }
        particles = next;
        if step % cfg.record_every == 0 || step == cfg.total_steps {
            energy.push((step, eieg_estimate(&reference, &particles, &kernel)?));
        }
        let snap = if cfg.snapshot_every > 0 {
            step % cfg.snapshot_every == 0 || step == cfg.total_steps
        } else {
            step == cfg.total_steps
        };
        if snap {
            snapshots.push((step, particles.clone()));
        }
    }

    Ok(FlowRun {
        initial: init,
        particles,
        energy,
        snapshots,
        max_displacement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> FlowConfig {
        FlowConfig::default()
    }

    #[test]
    fn pair_force_examples() {
        let c = cfg();
        assert_eq!(pair_force(&c, &[0.0, 0.0], &[1.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(pair_force(&c, &[0.4, 0.4], &[0.4, 0.4]), vec![0.0, 0.0]);
        assert_eq!(pair_force(&c, &[0.0, 0.0], &[0.5, 0.0]), vec![0.5, 0.0]);
    }

    #[test]
    fn force_branches_meet_at_cutoff() {
        let c = FlowConfig {
            cutoff: 0.7,
            ..cfg()
        };
        let y = [0.7, 0.0];
        let outer = pair_force(&c, &[0.0, 0.0], &y)[0];
        let inner = 0.7 / 0.7f64.powi(3);
        assert_eq!(outer, 0.7 * 0.7f64.powi(-3));
        assert!((outer - inner).abs() < 1e-15);
    }

    #[test]
    fn single_pair_step_with_table_values() {
        let p = SampleBatch::from_rows(&[[1.0, 0.0]]).unwrap();
        let d = SampleBatch::from_rows(&[[0.0, 0.0]]).unwrap();
        let next = flow_step(&cfg(), &p, &d).unwrap();
        assert_eq!(next.row(0), &[-9.0, 0.0]);
    }

    #[test]
    fn zero_mobilities_freeze_particles() {
        let c = FlowConfig {
            mobility_m1: 0.0,
            mobility_m2: 0.0,
            ..cfg()
        };
        let p = SampleBatch::from_rows(&[[1.0, 0.0], [0.2, 3.0]]).unwrap();
        let d = SampleBatch::from_rows(&[[0.0, 0.0]]).unwrap();
        assert_eq!(flow_step(&c, &p, &d).unwrap(), p);
    }

    #[test]
    fn zero_steps_keeps_initial_noise() {
        let c = FlowConfig {
            total_steps: 0,
            ..cfg()
        };
        let init = initial_particles(&c, 2);
        let run = run_flow(&c, init.clone(), &crate::datasets::MixtureSpec::two_mode()).unwrap();
        assert_eq!(run.particles, init);
        assert_eq!(run.energy.len(), 1);
    }

    #[test]
    fn divergence_aborts() {
        let c = FlowConfig {
            mobility_m1: 1e9,
            mobility_m2: 0.0,
            total_steps: 5,
            ..cfg()
        };
        let init = initial_particles(&c, 2);
        let err = run_flow(&c, init, &crate::datasets::MixtureSpec::two_mode()).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }));
    }
}
