use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classify::{DEFAULT_FOLDS, DEFAULT_K};
use crate::error::{invalid, Result};
use crate::glcm::{standard_offsets, OffsetVector, DEFAULT_DISTANCES};
use crate::neuron::NeuronParams;
use crate::signal::{SyntheticCorpusSpec, DEFAULT_CUTOFF_HZ};
use crate::spikestats::DEFAULT_FANO_WINDOW_S;
use crate::volume::{DEFAULT_BIN_S, DEFAULT_LEVELS};

/// Where trials come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Generated in memory from a corpus description.
    Synthetic(SyntheticCorpusSpec),
    /// Directory of trace CSVs (one trial per file).
    TraceDir(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreprocessParams {
    pub cutoff_hz: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            cutoff_hz: DEFAULT_CUTOFF_HZ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OffsetSpec {
    pub distances: Vec<u32>,
}

impl Default for OffsetSpec {
    fn default() -> Self {
        OffsetSpec {
            distances: DEFAULT_DISTANCES.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
    pub folds: usize,
    /// Z-score features with training statistics before computing distances.
    pub standardize: bool,
    /// Extra k values reported by the accuracy comparison.
    pub k_sweep: Vec<usize>,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: DEFAULT_K,
            folds: DEFAULT_FOLDS,
            standardize: true,
            k_sweep: vec![1, 3, 5, 7, 9],
        }
    }
}

/// Which taxel the single-taxel baseline reads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaxelParams {
    pub row: usize,
    pub col: usize,
    pub fano_window_s: f64,
}

impl Default for TaxelParams {
    fn default() -> Self {
        TaxelParams {
            row: 1,
            col: 1,
            fano_window_s: DEFAULT_FANO_WINDOW_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationParams {
    pub n_values: Vec<usize>,
    pub repeats: usize,
}

impl Default for PerturbationParams {
    fn default() -> Self {
        PerturbationParams {
            n_values: vec![0, 2, 4, 8, 12, 16],
            repeats: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TorParams {
    pub fractions: Vec<f64>,
}

impl Default for TorParams {
    fn default() -> Self {
        TorParams {
            fractions: (1..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct VelocitySplitParams {
    /// Held-out velocities; empty means every velocity in turn.
    pub test_velocities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GainSweepParams {
    pub gains: Vec<f64>,
    pub bin_width_s: f64,
    /// Velocity whose trials are swept; the slowest one when unset.
    pub velocity: Option<f64>,
    pub trials_per_label: usize,
}

impl Default for GainSweepParams {
    fn default() -> Self {
        GainSweepParams {
            gains: vec![5.0, 8.0, 11.0, 14.0, 17.0, 20.0],
            bin_width_s: 0.005,
            velocity: None,
            trials_per_label: 5,
        }
    }
}

fn default_bin() -> f64 {
    DEFAULT_BIN_S
}
fn default_levels() -> usize {
    DEFAULT_LEVELS
}

/// Everything an experiment run depends on besides the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub neuron: NeuronParams,
    #[serde(default)]
    pub preprocess: PreprocessParams,
    #[serde(default = "default_bin")]
    pub bin_s: f64,
    #[serde(default = "default_levels")]
    pub num_levels: usize,
    #[serde(default)]
    pub offsets: OffsetSpec,
    #[serde(default)]
    pub knn: KnnParams,
    #[serde(default)]
    pub single_taxel: TaxelParams,
    #[serde(default)]
    pub perturbation: PerturbationParams,
    #[serde(default)]
    pub tor: TorParams,
    #[serde(default)]
    pub velocity_split: VelocitySplitParams,
    #[serde(default)]
    pub gain_sweep: GainSweepParams,
    #[serde(default)]
    pub seed: u64,
}

impl ExperimentConfig {
    /// Defaults everywhere, reading `data` from the given source.
    pub fn with_data(data: DataSource) -> Self {
        ExperimentConfig {
            data,
            neuron: NeuronParams::default(),
            preprocess: PreprocessParams::default(),
            bin_s: DEFAULT_BIN_S,
            num_levels: DEFAULT_LEVELS,
            offsets: OffsetSpec::default(),
            knn: KnnParams::default(),
            single_taxel: TaxelParams::default(),
            perturbation: PerturbationParams::default(),
            tor: TorParams::default(),
            velocity_split: VelocitySplitParams::default(),
            gain_sweep: GainSweepParams::default(),
            seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Synthetic(spec) = &self.data {
            spec.validate()?;
        }
        self.neuron.validate()?;
        if !(self.bin_s > 0.0) {
            return Err(invalid("bin_s must be > 0"));
        }
        if !(2..=32).contains(&self.num_levels) {
            return Err(invalid("num_levels must lie in [2, 32]"));
        }
        if self.knn.k == 0 || self.knn.folds < 2 {
            return Err(invalid("knn needs k >= 1 and folds >= 2"));
        }
        if self.tor.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(invalid("TOR fractions must lie in (0, 1]"));
        }
        self.offset_vectors()?;
        Ok(())
    }

    pub fn offset_vectors(&self) -> Result<Vec<OffsetVector>> {
        if self.offsets.distances.is_empty() {
            return Err(invalid("offset distances must be non-empty"));
        }
        standard_offsets(&self.offsets.distances)
    }
}

const DEFAULT_CONFIG: &str = include_str!("../../data/default_experiment.json");

/// The bundled experiment config over the default synthetic corpus.
pub fn default_config() -> ExperimentConfig {
    ExperimentConfig::from_json(DEFAULT_CONFIG).expect("bundled config is valid")
}
