use std::path::Path;

use rayon::prelude::*;

use super::config::{DataSource, ExperimentConfig};
use crate::classify::same_velocity;
use crate::error::{invalid, Error, Result};
use crate::neuron::{encode_array, SpikeArray};
use crate::signal::{load_trace, preprocess, SensorTrace};

/// One encoded trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub label: usize,
    pub velocity_index: usize,
    pub spikes: SpikeArray,
}

/// All encoded trials of an experiment, with label and velocity tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub labels: Vec<String>,
    /// Ascending.
    pub velocities: Vec<f64>,
    pub trials: Vec<Trial>,
    pub synthetic: bool,
}

impl Corpus {
    /// Generates or loads every trace, preprocesses and encodes it.
    pub fn build(cfg: &ExperimentConfig) -> Result<Corpus> {
        let arrays: Vec<SpikeArray> = trace_sources(cfg)?
            .par_iter()
            .map(|src| encode_array(&preprocessed_trace(cfg, src)?, &cfg.neuron))
            .collect::<Result<_>>()?;
        let labels = match &cfg.data {
            DataSource::Synthetic(spec) => Some(spec.labels()),
            DataSource::TraceDir(_) => None,
        };
        Corpus::from_spike_arrays(arrays, labels)
    }

    /// Groups spike arrays by label and velocity. Labels follow `labels` when
    /// given, otherwise first appearance.
    pub fn from_spike_arrays(arrays: Vec<SpikeArray>, labels: Option<Vec<String>>) -> Result<Corpus> {
        if arrays.is_empty() {
            return Err(Error::InsufficientData("corpus holds no trials".into()));
        }
        let mut labels = labels.unwrap_or_default();
        let mut velocities: Vec<f64> = Vec::new();
        for a in &arrays {
            a.validate()?;
            if !labels.contains(&a.label) {
                labels.push(a.label.clone());
            }
            if !velocities.iter().any(|&v| same_velocity(v, a.velocity_mm_s)) {
                velocities.push(a.velocity_mm_s);
            }
        }
        velocities.sort_by(f64::total_cmp);
        let synthetic = arrays.iter().all(|a| a.synthetic);
        let trials = arrays
            .into_iter()
            .map(|spikes| Trial {
                label: labels.iter().position(|l| *l == spikes.label).expect("registered"),
                velocity_index: velocities
                    .iter()
                    .position(|&v| same_velocity(v, spikes.velocity_mm_s))
                    .expect("registered"),
                spikes,
            })
            .collect();
        Ok(Corpus {
            labels,
            velocities,
            trials,
            synthetic,
        })
    }

    /// Indices of the trials recorded at one velocity.
    pub fn at_velocity(&self, velocity_index: usize) -> Vec<usize> {
        (0..self.trials.len())
            .filter(|&i| self.trials[i].velocity_index == velocity_index)
            .collect()
    }

    pub fn velocity_index(&self, velocity: f64) -> Result<usize> {
        self.velocities
            .iter()
            .position(|&v| same_velocity(v, velocity))
            .ok_or_else(|| invalid(format!("velocity {velocity} is not in the data")))
    }
}

/// A single trace still to be produced.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceSource {
    /// (texture, velocity index, trial) of the synthetic corpus.
    Synthetic(usize, usize, u32),
    File(std::path::PathBuf),
}

/// Every trace the config's data source provides, in a fixed order.
pub fn trace_sources(cfg: &ExperimentConfig) -> Result<Vec<TraceSource>> {
    match &cfg.data {
        DataSource::Synthetic(spec) => {
            let mut out = Vec::new();
            for t in 0..spec.textures.len() {
                for vi in 0..spec.velocities.len() {
                    out.extend((0..spec.trials).map(|trial| TraceSource::Synthetic(t, vi, trial)));
                }
            }
            Ok(out)
        }
        DataSource::TraceDir(dir) => Ok(trace_files(dir)?.into_iter().map(TraceSource::File).collect()),
    }
}

/// Produces one trace, trimmed to the sliding phase and preprocessed.
pub fn preprocessed_trace(cfg: &ExperimentConfig, source: &TraceSource) -> Result<SensorTrace> {
    let cutoff = cfg.preprocess.cutoff_hz;
    match (source, &cfg.data) {
        (TraceSource::Synthetic(t, vi, trial), DataSource::Synthetic(spec)) => {
            preprocess(&spec.generate(*t, *vi, *trial)?, cutoff)
        }
        (TraceSource::File(p), _) => {
            let t = load_trace(p)?.sliding_phase().map_err(|e| e.in_file(p))?;
            preprocess(&t, cutoff).map_err(|e| e.in_file(p))
        }
        _ => Err(invalid("trace source does not match the configured data")),
    }
}

/// Preprocessed traces at `velocity`, keeping at most `per_label` trials of
/// each label (in source order).
pub fn preprocessed_traces_at(cfg: &ExperimentConfig, velocity: f64, per_label: usize) -> Result<Vec<SensorTrace>> {
    let mut kept: Vec<(String, usize)> = Vec::new();
    let mut out = Vec::new();
    for src in trace_sources(cfg)? {
        if let (TraceSource::Synthetic(_, vi, _), DataSource::Synthetic(spec)) = (&src, &cfg.data) {
            if !same_velocity(spec.velocities[*vi], velocity) {
                continue;
            }
        }
        let trace = preprocessed_trace(cfg, &src)?;
        if !same_velocity(trace.velocity_mm_s, velocity) {
            continue;
        }
        let slot = match kept.iter().position(|(l, _)| *l == trace.label) {
            Some(i) => i,
            None => {
                kept.push((trace.label.clone(), 0));
                kept.len() - 1
            }
        };
        if kept[slot].1 < per_label {
            kept[slot].1 += 1;
            out.push(trace);
        }
    }
    Ok(out)
}

/// `*.csv` files directly inside `dir`, sorted by name.
pub fn trace_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::from(e).in_file(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InsufficientData(format!("no .csv traces in {}", dir.display())));
    }
    Ok(files)
}
