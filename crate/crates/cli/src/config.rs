//! Experiment files. Every section rejects unknown keys and falls back to the
//! library defaults for anything left out.

use std::path::{Path, PathBuf};

use eieg_core::datasets::MixtureSpec;
use eieg_core::flow::FlowConfig;
use eieg_core::kernels::{KernelConfig, StabilizerConfig};
use eieg_core::spectral::{FlowKind, RateProbe};
use eieg_core::trainer::TrainConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    TwoMode,
    Ring8,
    Grid25,
}

/// Either a named preset or an explicit mixture. Weights default to uniform.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub preset: Option<Preset>,
    pub centers: Option<Vec<Vec<f64>>>,
    pub std: Option<f64>,
    pub weights: Option<Vec<f64>>,
}

impl DatasetSection {
    pub fn resolve(&self, fallback: Preset) -> Result<MixtureSpec, Failure> {
        let custom = self.centers.is_some() || self.std.is_some() || self.weights.is_some();
        if self.preset.is_some() && custom {
            return Err(Failure::Config(
                "dataset: give either `preset` or `centers`/`std`/`weights`, not both".into(),
            ));
        }
        if !custom {
            return Ok(match self.preset.unwrap_or(fallback) {
                Preset::TwoMode => MixtureSpec::two_mode(),
                Preset::Ring8 => MixtureSpec::ring8(),
                Preset::Grid25 => MixtureSpec::grid25(),
            });
        }
        let centers = self
            .centers
            .clone()
            .ok_or_else(|| Failure::Config("dataset: `centers` is required".into()))?;
        let std = self
            .std
            .ok_or_else(|| Failure::Config("dataset: `std` is required".into()))?;
        let weights = self
            .weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / centers.len().max(1) as f64; centers.len()]);
        Ok(MixtureSpec::new(centers, std, weights)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleEval {
    /// Generated samples written out and scored.
    pub samples: usize,
    pub threshold_sigmas: f64,
    /// Writes `scatter.svg` of data against generated samples.
    pub scatter: bool,
}

impl Default for SampleEval {
    fn default() -> Self {
        Self {
            samples: 2000,
            threshold_sigmas: eieg_core::evalmetrics::DEFAULT_THRESHOLD_SIGMAS,
            scatter: true,
        }
    }
}

/// `gan-train` and `eieg-train`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainFile {
    pub dataset: DatasetSection,
    pub train: TrainConfig,
    pub eval: SampleEval,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowFile {
    pub dataset: DatasetSection,
    pub flow: FlowConfig,
    pub scatter: bool,
}

impl Default for FlowFile {
    fn default() -> Self {
        Self {
            dataset: DatasetSection::default(),
            flow: FlowConfig::default(),
            scatter: true,
        }
    }
}

/// `probe.mode` is replaced by each entry of `modes` in turn.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralFile {
    pub probe: RateProbe,
    pub kinds: Vec<FlowKind>,
    pub modes: Vec<(i32, i32)>,
}

impl Default for SpectralFile {
    fn default() -> Self {
        Self {
            probe: RateProbe::default(),
            kinds: vec![
                FlowKind::Generator,
                FlowKind::DiscriminatorRaw,
                FlowKind::DiscriminatorStabilized { epsilon: 1.0 },
            ],
            modes: vec![(1, 0), (2, 0)],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KdeSection {
    /// Silverman's rule when absent.
    pub bandwidth: Option<f64>,
    /// Square plotting window `[-w, w]^2`; sized from the mixture when absent.
    pub half_width: Option<f64>,
    pub resolution: (usize, usize),
}

impl Default for KdeSection {
    fn default() -> Self {
        Self {
            bandwidth: None,
            half_width: None,
            resolution: (100, 100),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalFile {
    pub dataset: DatasetSection,
    /// CSV with one header line and one sample per row.
    pub samples: Option<PathBuf>,
    pub threshold_sigmas: f64,
    pub kde: KdeSection,
}

impl Default for EvalFile {
    fn default() -> Self {
        Self {
            dataset: DatasetSection::default(),
            samples: None,
            threshold_sigmas: eieg_core::evalmetrics::DEFAULT_THRESHOLD_SIGMAS,
            kde: KdeSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelProbeFile {
    pub kernel: KernelConfig,
    pub stabilizer: StabilizerConfig,
    pub r: Vec<f64>,
}

impl Default for KernelProbeFile {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            kernel: train.kernel,
            stabilizer: train.stabilizer,
            r: vec![0.0, 0.05, 0.1, 0.5, 1.0, 2.0],
        }
    }
}

/// Reads a TOML file, or the defaults when no path is given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Failure> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<TrainFile>("[train]\nlr_gen = 1.0\n").is_err());
        assert!(toml::from_str::<TrainFile>("[nonsense]\n").is_err());
        assert!(toml::from_str::<FlowFile>("[flow]\ndt = 0.01\nbogus = 1\n").is_err());
        assert!(toml::from_str::<SpectralFile>("[probe]\nresolution = 32\nfoo = 2\n").is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let f: TrainFile = toml::from_str("[train]\nlr_g = 1e-3\n[dataset]\npreset = \"two_mode\"\n").unwrap();
        assert_eq!(f.train.lr_g, 1e-3);
        assert_eq!(f.train.n_critic, TrainConfig::default().n_critic);
        assert_eq!(f.dataset.resolve(Preset::Grid25).unwrap(), MixtureSpec::two_mode());

        let s: SpectralFile = toml::from_str(
            "kinds = [{ kind = \"discriminator_stabilized\", epsilon = 0.05 }]\nmodes = [[1, 1]]\n",
        )
        .unwrap();
        assert_eq!(s.kinds, vec![FlowKind::DiscriminatorStabilized { epsilon: 0.05 }]);
        assert_eq!(s.modes, vec![(1, 1)]);
        assert_eq!(s.probe, RateProbe::default());
    }

    #[test]
    fn custom_mixture_with_uniform_weights() {
        let d: DatasetSection = toml::from_str("centers = [[0.0, 0.0], [1.0, 1.0]]\nstd = 0.1\n").unwrap();
        let spec = d.resolve(Preset::Grid25).unwrap();
        assert_eq!(spec.weights, vec![0.5, 0.5]);

        let both: DatasetSection = toml::from_str("preset = \"ring8\"\nstd = 0.1\n").unwrap();
        assert!(both.resolve(Preset::Grid25).is_err());
    }
}
