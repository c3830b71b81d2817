//! Generator-only EIE training and the elastic-discriminator GAN loop.
//!
//! One generator step of the GAN loop is `n_critic` discriminator ascent
//! steps on the stabilized objective, each on a fresh data batch and a fresh
//! noise batch, followed by one generator descent step on another fresh pair
//! of batches. With the discriminator disabled the embedding is the identity
//! and the loop is plain generator-only training in data space.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::batch::SampleBatch;
use crate::datasets::{standard_normal, DataSampler};
use crate::energy::{eieg_value_and_grads, generator_loss_and_grad};
use crate::error::{Error, Result};
use crate::kernels::{CombinedKernel, ElasticKernel, KernelConfig, RadialKernel, StabilizerConfig};
use crate::net::{AdamConfig, AdamState, Mlp};
use crate::rng::{SeededRng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr_g: f64,
    pub lr_d: f64,
    /// Discriminator updates per generator update.
    pub n_critic: usize,
    pub batch_size: usize,
    /// Total generator updates.
    pub generator_steps: usize,
    pub feature_dim: usize,
    pub noise_dim: usize,
    pub hidden: Vec<usize>,
    pub slope: f64,
    pub kernel: KernelConfig,
    pub stabilizer: StabilizerConfig,
    pub seed: u64,
    pub self_interaction: bool,
    pub stabilizer_in_generator_loss: bool,
    pub use_discriminator: bool,
    /// Record a snapshot of generated samples every this many generator
    /// steps; 0 disables snapshots.
    pub snapshot_every: usize,
    pub snapshot_size: usize,
    /// Wall-clock column of the history; off keeps histories reproducible.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr_g: 1e-4,
            lr_d: 1e-5,
            n_critic: 3,
            batch_size: 64,
            generator_steps: 10_000,
            feature_dim: 2,
            noise_dim: 2,
            hidden: vec![100, 50],
            slope: 0.2,
            kernel: KernelConfig {
                dim_n: 2,
                cutoff: 0.1,
            },
            stabilizer: StabilizerConfig {
                order_m: 3,
                cutoff: 0.8,
                weight: 1.0,
            },
            seed: 0,
            self_interaction: true,
            stabilizer_in_generator_loss: false,
            use_discriminator: true,
            snapshot_every: 0,
            snapshot_size: 512,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, data_dim: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.lr_g > 0.0) || (self.use_discriminator && !(self.lr_d > 0.0)) {
            return bad("learning rates must be positive".into());
        }
        if self.batch_size == 0 || self.noise_dim == 0 || self.feature_dim == 0 {
            return bad("batch_size, noise_dim and feature_dim must be positive".into());
        }
        if self.use_discriminator && self.n_critic == 0 {
            return bad("n_critic must be positive".into());
        }
        self.kernel.validate()?;
        let expected = if self.use_discriminator {
            self.feature_dim
        } else {
            data_dim
        };
        if self.kernel.dim_n as usize != expected {
            return bad(format!(
                "kernel dim_n = {} but the loss is evaluated in dimension {expected}",
                self.kernel.dim_n
            ));
        }
        if self.use_discriminator || self.stabilizer_in_generator_loss {
            self.stabilizer.validate_against(&self.kernel)?;
        }
        Ok(())
    }

    pub fn generator_dims(&self, data_dim: usize) -> Vec<usize> {
        let mut d = vec![self.noise_dim];
        d.extend(&self.hidden);
        d.push(data_dim);
        d
    }

    pub fn discriminator_dims(&self, data_dim: usize) -> Vec<usize> {
        let mut d = vec![data_dim];
        d.extend(&self.hidden);
        d.push(self.feature_dim);
        d
    }
}

/// Generator updates making up `epochs` passes over a finite dataset.
pub fn steps_for_epochs(dataset_size: usize, batch_size: usize, epochs: usize) -> usize {
    dataset_size.div_ceil(batch_size) * epochs
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    /// Last discriminator objective of this step; absent without a discriminator.
    pub loss_d: Option<f64>,
    pub loss_g: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub samples: SampleBatch,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
    pub discriminator_updates: usize,
    pub generator_updates: usize,
    pub data_batches_drawn: usize,
    pub noise_batches_drawn: usize,
}

impl TrainHistory {
    /// CSV with header `step,loss_d,loss_g,wall_ms`; a missing `loss_d` is empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,loss_d,loss_g,wall_ms\n");
        for r in &self.records {
            let d = r.loss_d.map(|v| format!("{v:?}")).unwrap_or_default();
            s.push_str(&format!("{},{},{:?},{:?}\n", r.step, d, r.loss_g, r.wall_ms));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub generator: Mlp,
    pub discriminator: Option<Mlp>,
    pub history: TrainHistory,
}

/// A run stopped by a non-finite loss or parameter. Carries everything
/// recorded up to the offending step.
#[derive(Debug, Clone)]
pub struct TrainAbort {
    pub error: Error,
    pub step: usize,
    pub phase: &'static str,
    pub history: TrainHistory,
}

impl std::fmt::Display for TrainAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training aborted at step {} ({}): {}", self.step, self.phase, self.error)
    }
}

impl std::error::Error for TrainAbort {}

/// Loss and parameter gradient of the generator objective for one batch.
///
/// The chain is: loss gradient on embedded generated points, back through
/// the discriminator to its inputs (discriminator parameters untouched),
/// then back through the generator to its parameters.
pub fn generator_gradient<K: RadialKernel + ?Sized>(
    generator: &Mlp,
    discriminator: Option<&Mlp>,
    x: &SampleBatch,
    z: &SampleBatch,
    kernel: &K,
    self_interaction: bool,
) -> Result<(f64, Vec<f64>)> {
    let g_cache = generator.forward_cached(z)?;
    let g = g_cache.output(generator.output_dim());
    let (loss, upstream) = match discriminator {
        Some(d) => {
            let fx = d.forward(x)?;
            let fg_cache = d.forward_cached(&g)?;
            let fg = fg_cache.output(d.output_dim());
            let (loss, dfg) = generator_loss_and_grad(&fx, &fg, kernel, self_interaction)?;
            let mut scratch = vec![0.0; d.param_count()];
            let dg = d.backward_into(&fg_cache, &dfg, &mut scratch)?;
            (loss, dg)
        }
        None => generator_loss_and_grad(x, &g, kernel, self_interaction)?,
    };
    let (grads, _) = generator.backward(&g_cache, &upstream)?;
    Ok((loss, grads))
}

/// Discriminator objective and its gradient with respect to the
/// discriminator parameters, for embedded data `x` and generated `g`.
pub fn discriminator_gradient<K: RadialKernel + ?Sized>(
    discriminator: &Mlp,
    x: &SampleBatch,
    g: &SampleBatch,
    kernel: &K,
) -> Result<(f64, Vec<f64>)> {
    let cx = discriminator.forward_cached(x)?;
    let cg = discriminator.forward_cached(g)?;
    let fx = cx.output(discriminator.output_dim());
    let fg = cg.output(discriminator.output_dim());
    let (value, dfx, dfg) = eieg_value_and_grads(&fx, &fg, kernel)?;
    let mut grads = vec![0.0; discriminator.param_count()];
    discriminator.backward_into(&cx, &dfx, &mut grads)?;
    discriminator.backward_into(&cg, &dfg, &mut grads)?;
    Ok((value, grads))
}

struct Run<'a> {
    cfg: &'a TrainConfig,
    sampler: &'a dyn DataSampler,
    data_rng: SeededRng,
    noise_rng: SeededRng,
    history: TrainHistory,
}

impl Run<'_> {
    fn draw(&mut self) -> (SampleBatch, SampleBatch) {
        let x = self.sampler.sample_batch(self.cfg.batch_size, &mut self.data_rng);
        let z = standard_normal(self.cfg.batch_size, self.cfg.noise_dim, &mut self.noise_rng);
        self.history.data_batches_drawn += 1;
        self.history.noise_batches_drawn += 1;
        (x, z)
    }
}

fn non_finite(what: &str, step: usize) -> Error {
    Error::NonFinite {
        what: what.to_string(),
        step,
    }
}

/// Runs the elastic-discriminator GAN (or generator-only training when
/// `use_discriminator` is off). Deterministic given `cfg.seed`.
pub fn train_gan(
    cfg: &TrainConfig,
    sampler: &dyn DataSampler,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    let abort = |error: Error, step: usize, phase: &'static str, history: TrainHistory| TrainAbort {
        error,
        step,
        phase,
        history,
    };
    let data_dim = sampler.dim();
    cfg.validate(data_dim)
        .map_err(|e| abort(e, 0, "config", TrainHistory::default()))?;
    let setup = || -> Result<_> {
        let mut init_rng = SeededRng::stream(cfg.seed, Stream::Init);
        let generator = Mlp::init_with(&mut init_rng, &cfg.generator_dims(data_dim), cfg.slope)?;
        let discriminator = if cfg.use_discriminator {
            Some(Mlp::init_with(
                &mut init_rng,
                &cfg.discriminator_dims(data_dim),
                cfg.slope,
            )?)
        } else {
            None
        };
        let g_opt = AdamState::new(AdamConfig::with_lr(cfg.lr_g), generator.param_count())?;
        let d_opt = match &discriminator {
            Some(d) => Some(AdamState::new(AdamConfig::with_lr(cfg.lr_d), d.param_count())?),
            None => None,
        };
        let elastic = ElasticKernel::new(cfg.kernel)?;
        let combined = if cfg.use_discriminator || cfg.stabilizer_in_generator_loss {
            Some(CombinedKernel::new(cfg.kernel, cfg.stabilizer)?)
        } else {
            None
        };
        Ok((generator, discriminator, g_opt, d_opt, elastic, combined))
    };
    let (mut generator, mut discriminator, mut g_opt, mut d_opt, elastic, combined) =
        setup().map_err(|e| abort(e, 0, "setup", TrainHistory::default()))?;
    let g_combined = combined.filter(|_| cfg.stabilizer_in_generator_loss);

    let eval_noise = standard_normal(
        cfg.snapshot_size.max(1),
        cfg.noise_dim,
        &mut SeededRng::stream(cfg.seed, Stream::Eval),
    );
    let mut run = Run {
        cfg,
        sampler,
        data_rng: SeededRng::stream(cfg.seed, Stream::Data),
        noise_rng: SeededRng::stream(cfg.seed, Stream::Noise),
        history: TrainHistory::default(),
    };
    let start = Instant::now();
    let mut last_wall = 0.0_f64;

    let snapshot = |g: &Mlp, step: usize, h: &mut TrainHistory| -> Result<()> {
        if cfg.snapshot_every > 0 && step.is_multiple_of(cfg.snapshot_every) {
            h.snapshots.push(Snapshot {
                step,
                samples: g.forward(&eval_noise)?,
            });
        }
        Ok(())
    };
    snapshot(&generator, 0, &mut run.history)
        .map_err(|e| abort(e, 0, "snapshot", run.history.clone()))?;

    for step in 1..=cfg.generator_steps {
        let mut loss_d = None;
        if let (Some(d), Some(opt), Some(kernel)) = (&mut discriminator, &mut d_opt, &combined) {
            for _ in 0..cfg.n_critic {
                let (x, z) = run.draw();
                let mut inner = || -> Result<f64> {
                    let g = generator.forward(&z)?;
                    let (value, grads) = discriminator_gradient(d, &x, &g, kernel)?;
                    if !value.is_finite() {
                        return Err(non_finite("discriminator objective", step));
                    }
                    opt.step(d.params_mut(), &grads, true)?;
                    if d.params().iter().any(|p| !p.is_finite()) {
                        return Err(non_finite("discriminator parameters", step));
                    }
                    Ok(value)
                };
                let value = inner()
                    .map_err(|e| abort(e, step, "discriminator", run.history.clone()))?;
                run.history.discriminator_updates += 1;
                loss_d = Some(value);
            }
        }

        let (x, z) = run.draw();
        let mut gen_step = || -> Result<f64> {
            let d = discriminator.as_ref();
            let (loss, grads) = match &g_combined {
                Some(k) => generator_gradient(&generator, d, &x, &z, k, cfg.self_interaction)?,
                None => generator_gradient(&generator, d, &x, &z, &elastic, cfg.self_interaction)?,
            };
            if !loss.is_finite() {
                return Err(non_finite("generator loss", step));
            }
            g_opt.step(generator.params_mut(), &grads, false)?;
            if generator.params().iter().any(|p| !p.is_finite()) {
                return Err(non_finite("generator parameters", step));
            }
            Ok(loss)
        };
        let loss_g = gen_step().map_err(|e| abort(e, step, "generator", run.history.clone()))?;
        run.history.generator_updates += 1;

        let wall_ms = if cfg.record_wall_time {
            last_wall = last_wall.max(start.elapsed().as_secs_f64() * 1e3);
            last_wall
        } else {
            0.0
        };
        run.history.records.push(StepRecord {
            step,
            loss_d,
            loss_g,
            wall_ms,
        });
        snapshot(&generator, step, &mut run.history)
            .map_err(|e| abort(e, step, "snapshot", run.history.clone()))?;
    }

    Ok(TrainOutcome {
        generator,
        discriminator,
        history: run.history,
    })
}

/// Generator-only training with the elastic kernel applied in data space.
pub fn train_eieg_generator(
    cfg: &TrainConfig,
    sampler: &dyn DataSampler,
) -> std::result::Result<TrainOutcome, TrainAbort> {
    let mut cfg = cfg.clone();
    cfg.use_discriminator = false;
    train_gan(&cfg, sampler)
}

/// Draws `n` generator samples from a dedicated noise stream of `seed`.
pub fn generate(generator: &Mlp, n: usize, seed: u64) -> Result<SampleBatch> {
    let z = standard_normal(n, generator.input_dim(), &mut SeededRng::stream(seed, Stream::Aux));
    generator.forward(&z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::MixtureSpec;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            generator_steps: 5,
            batch_size: 16,
            hidden: vec![8],
            ..TrainConfig::default()
        }
    }

    #[test]
    fn counts_follow_algorithm_shape() {
        let cfg = small_cfg();
        let out = train_gan(&cfg, &MixtureSpec::grid25()).unwrap();
        let h = &out.history;
        assert_eq!(h.generator_updates, 5);
        assert_eq!(h.discriminator_updates, 15);
        assert_eq!(h.data_batches_drawn, 20);
        assert_eq!(h.noise_batches_drawn, 20);
        assert_eq!(h.records.len(), 5);
    }

    #[test]
    fn zero_steps_returns_initial_generator() {
        let mut cfg = small_cfg();
        cfg.generator_steps = 0;
        cfg.use_discriminator = false;
        let out = train_eieg_generator(&cfg, &MixtureSpec::two_mode()).unwrap();
        let mut init_rng = SeededRng::stream(cfg.seed, Stream::Init);
        let fresh = Mlp::init_with(&mut init_rng, &cfg.generator_dims(2), cfg.slope).unwrap();
        assert_eq!(out.generator, fresh);
    }

    #[test]
    fn config_dimension_rule() {
        let mut cfg = small_cfg();
        cfg.feature_dim = 3;
        assert!(train_gan(&cfg, &MixtureSpec::grid25()).is_err());
        cfg.kernel.dim_n = 3;
        cfg.stabilizer.order_m = 4;
        assert!(train_gan(&cfg, &MixtureSpec::grid25()).is_ok());
    }

    #[test]
    fn history_csv_header() {
        let out = train_gan(&small_cfg(), &MixtureSpec::grid25()).unwrap();
        let csv = out.history.to_csv();
        assert!(csv.starts_with("step,loss_d,loss_g,wall_ms\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    #[test]
    fn steps_per_epoch_rounds_up() {
        assert_eq!(steps_for_epochs(1000, 64, 1), 16);
        assert_eq!(steps_for_epochs(128, 64, 3), 6);
    }
}
