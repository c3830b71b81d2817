//! Elastic-interaction-energy (EIE) generative modeling at desk scale.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`] cutoff Riesz-type pair kernels and their analytic gradients
//! * [`energy`] the two-sample EIE estimator, generator/discriminator losses, Gaussian MMD
//! * [`net`] a small MLP with exact reverse-mode gradients and Adam
//! * [`trainer`] generator-only EIE training and the elastic-discriminator GAN loop
//! * [`flow`] the interacting-particle ODE sampler
//! * [`spectral`] pseudo-spectral evolution of periodic densities and growth-rate fits
//! * [`datasets`] seeded 2D Gaussian-mixture samplers
//! * [`evalmetrics`] mode coverage, KDE grids and energy traces

pub mod batch;
pub mod datasets;
pub mod energy;
pub mod error;
pub mod evalmetrics;
pub mod flow;
pub mod kernels;
pub mod net;
pub mod rng;
pub mod spectral;
pub mod trainer;

pub use batch::SampleBatch;
pub use error::{Error, Result};
pub use rng::SeededRng;
