use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::corpus::{preprocessed_traces_at, Corpus};
use super::features::{cross_validate_arrays, evaluate_fixed_split, Approach, CvRun};
use crate::classify::same_velocity;
use crate::error::{invalid, Error, Result};
use crate::neuron::{isi_histogram_sweep, IsiHistogram, SpikeArray};
use crate::seed::{self, STREAM_FOLDS, STREAM_PERTURB};
use crate::volume::{perturb_spatial, Quantizer};

/// One cross-validated accuracy with everything needed to trace it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub approach: Approach,
    pub accuracy: f64,
    pub per_fold: Vec<f64>,
    pub fold_seed: u64,
    pub confusion: Vec<Vec<u64>>,
    /// Per-fold quantizers (GLCM approaches only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quantizers: Vec<Quantizer>,
}

impl CvSummary {
    fn from_run(approach: Approach, run: CvRun) -> Self {
        CvSummary {
            approach,
            accuracy: run.result.accuracy,
            per_fold: run.result.per_fold,
            fold_seed: run.result.seed,
            confusion: run.result.confusion.counts,
            quantizers: run.quantizers,
        }
    }
}

/// `(glcm - taxel) / taxel · 100`; undefined when the taxel accuracy is 0.
pub fn change_pct(glcm: f64, taxel: f64) -> Option<f64> {
    (taxel > 0.0).then(|| (glcm - taxel) / taxel * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepPoint {
    pub k: usize,
    pub taxel: f64,
    pub glcm3d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub velocity_mm_s: f64,
    pub trials: usize,
    pub taxel: CvSummary,
    pub glcm3d: CvSummary,
    pub change_pct: Option<f64>,
    pub k_sweep: Vec<KSweepPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPoint {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub accuracies: Vec<f64>,
    /// Seed of each draw; trial `i` of a draw uses `derive(draw, 0, i)`.
    pub draw_seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationRow {
    pub velocity_mm_s: f64,
    pub taxel_reference: f64,
    pub points: Vec<PerturbationPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalRow {
    pub velocity_mm_s: f64,
    pub taxel: CvSummary,
    pub glcm2d: CvSummary,
    pub glcm3d: CvSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorPoint {
    pub fraction: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorRow {
    pub velocity_mm_s: f64,
    pub taxel_reference: f64,
    pub points: Vec<TorPoint>,
    /// Smallest fraction whose accuracy reaches the reference.
    pub smallest_matching_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub accuracy: f64,
    pub confusion: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantizer: Option<Quantizer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityRow {
    pub test_velocity_mm_s: f64,
    pub train_velocities_mm_s: Vec<f64>,
    pub train_trials: usize,
    pub test_trials: usize,
    pub taxel: SplitSummary,
    pub glcm3d: SplitSummary,
    pub change_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSweepResult {
    pub velocity_mm_s: f64,
    pub trials_per_label: usize,
    pub histograms: Vec<IsiHistogram>,
}

/// The experiments a run can select.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Accuracy,
    Perturbation,
    Temporal,
    Tor,
    Velocity,
    GainSweep,
    All,
}

impl Experiment {
    pub const NAMES: [&'static str; 7] = [
        "accuracy",
        "perturbation",
        "temporal",
        "tor",
        "velocity",
        "gain_sweep",
        "all",
    ];

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "accuracy" => Experiment::Accuracy,
            "perturbation" => Experiment::Perturbation,
            "temporal" => Experiment::Temporal,
            "tor" => Experiment::Tor,
            "velocity" => Experiment::Velocity,
            "gain_sweep" | "gain-sweep" => Experiment::GainSweep,
            "all" => Experiment::All,
            _ => {
                return Err(invalid(format!(
                    "unknown experiment {name:?}; expected one of {}",
                    Experiment::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Accuracy => "accuracy",
            Experiment::Perturbation => "perturbation",
            Experiment::Temporal => "temporal",
            Experiment::Tor => "tor",
            Experiment::Velocity => "velocity",
            Experiment::GainSweep => "gain_sweep",
            Experiment::All => "all",
        }
    }

    fn includes(&self, other: Experiment) -> bool {
        *self == Experiment::All || *self == other
    }
}

/// Result payload of a run. Deterministic given config and seed; wall-clock
/// information lives in [`super::RunMetadata`] instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub master_seed: u64,
    /// True when every trial came from the synthetic generator.
    pub synthetic: bool,
    pub labels: Vec<String>,
    pub velocities_mm_s: Vec<f64>,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<Vec<AccuracyRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Vec<PerturbationRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<Vec<TemporalRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tor: Option<Vec<TorRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<VelocityRow>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_sweep: Option<GainSweepResult>,
}

/// Fold seed shared by every cross-validation at one velocity, so that the
/// unperturbed / untruncated conditions reproduce the accuracy comparison.
pub fn fold_seed(master: u64, velocity_index: usize) -> u64 {
    seed::derive(master, STREAM_FOLDS, velocity_index as u64)
}

/// Seed of perturbation draw `repeat` at size `n` and one velocity.
pub fn perturbation_seed(master: u64, velocity_index: usize, n: usize, repeat: usize) -> u64 {
    let index = ((velocity_index as u64) << 40) | ((n as u64) << 20) | repeat as u64;
    seed::derive(master, STREAM_PERTURB, index)
}

struct VelocitySlice<'a> {
    index: usize,
    velocity: f64,
    arrays: Vec<&'a SpikeArray>,
    labels: Vec<usize>,
}

fn slices(corpus: &Corpus) -> Vec<VelocitySlice<'_>> {
    (0..corpus.velocities.len())
        .map(|vi| {
            let idx = corpus.at_velocity(vi);
            VelocitySlice {
                index: vi,
                velocity: corpus.velocities[vi],
                arrays: idx.iter().map(|&i| &corpus.trials[i].spikes).collect(),
                labels: idx.iter().map(|&i| corpus.trials[i].label).collect(),
            }
        })
        .collect()
}

fn cv(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    s: &VelocitySlice,
    arrays: &[&SpikeArray],
    approach: Approach,
    fraction: Option<f64>,
    k: usize,
) -> Result<CvRun> {
    cross_validate_arrays(
        cfg,
        &corpus.labels,
        arrays,
        &s.labels,
        approach,
        fraction,
        fold_seed(cfg.seed, s.index),
        k,
    )
}

pub fn run_accuracy_comparison(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<Vec<AccuracyRow>> {
    slices(corpus)
        .iter()
        .map(|s| {
            let taxel = cv(cfg, corpus, s, &s.arrays, Approach::Taxel, None, cfg.knn.k)?;
            let glcm = cv(cfg, corpus, s, &s.arrays, Approach::Glcm3d, None, cfg.knn.k)?;
            let k_sweep = cfg
                .knn
                .k_sweep
                .iter()
                .map(|&k| {
                    Ok(KSweepPoint {
                        k,
                        taxel: cv(cfg, corpus, s, &s.arrays, Approach::Taxel, None, k)?.result.accuracy,
                        glcm3d: cv(cfg, corpus, s, &s.arrays, Approach::Glcm3d, None, k)?
                            .result
                            .accuracy,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(AccuracyRow {
                velocity_mm_s: s.velocity,
                trials: s.arrays.len(),
                change_pct: change_pct(glcm.result.accuracy, taxel.result.accuracy),
                taxel: CvSummary::from_run(Approach::Taxel, taxel),
                glcm3d: CvSummary::from_run(Approach::Glcm3d, glcm),
                k_sweep,
            })
        })
        .collect()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn run_perturbation_study(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<Vec<PerturbationRow>> {
    let p = &cfg.perturbation;
    if p.repeats == 0 || p.n_values.is_empty() {
        return Err(invalid("perturbation study needs n values and repeats >= 1"));
    }
    let taxels = corpus.trials.first().map_or(0, |t| t.spikes.trains.len());
    if let Some(&bad) = p.n_values.iter().find(|&&n| n == 1 || n > taxels) {
        return Err(invalid(format!(
            "perturbation size {bad} impossible on {taxels} taxels (use 0 or 2..={taxels})"
        )));
    }
    slices(corpus)
        .iter()
        .map(|s| {
            let reference = cv(cfg, corpus, s, &s.arrays, Approach::Taxel, None, cfg.knn.k)?
                .result
                .accuracy;
            let points = p
                .n_values
                .iter()
                .map(|&n| {
                    let draws: Vec<(u64, f64)> = (0..p.repeats)
                        .into_par_iter()
                        .map(|r| {
                            let draw = perturbation_seed(cfg.seed, s.index, n, r);
                            let acc = if n == 0 {
                                cv(cfg, corpus, s, &s.arrays, Approach::Glcm3d, None, cfg.knn.k)?
                            } else {
                                let moved: Vec<SpikeArray> = s
                                    .arrays
                                    .iter()
                                    .enumerate()
                                    .map(|(i, a)| perturb_spatial(a, n, seed::derive(draw, 0, i as u64)))
                                    .collect::<Result<_>>()?;
                                let refs: Vec<&SpikeArray> = moved.iter().collect();
                                cv(cfg, corpus, s, &refs, Approach::Glcm3d, None, cfg.knn.k)?
                            };
                            Ok((draw, acc.result.accuracy))
                        })
                        .collect::<Result<_>>()?;
                    let accuracies: Vec<f64> = draws.iter().map(|d| d.1).collect();
                    let (mean, sd) = mean_sd(&accuracies);
                    Ok(PerturbationPoint {
                        n,
                        mean,
                        sd,
                        accuracies,
                        draw_seeds: draws.iter().map(|d| d.0).collect(),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(PerturbationRow {
                velocity_mm_s: s.velocity,
                taxel_reference: reference,
                points,
            })
        })
        .collect()
}

pub fn run_temporal_collapse_study(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<Vec<TemporalRow>> {
    slices(corpus)
        .iter()
        .map(|s| {
            let run = |a| cv(cfg, corpus, s, &s.arrays, a, None, cfg.knn.k).map(|r| CvSummary::from_run(a, r));
            Ok(TemporalRow {
                velocity_mm_s: s.velocity,
                taxel: run(Approach::Taxel)?,
                glcm2d: run(Approach::Glcm2d)?,
                glcm3d: run(Approach::Glcm3d)?,
            })
        })
        .collect()
}

pub fn run_tor_study(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<Vec<TorRow>> {
    let mut fractions = cfg.tor.fractions.clone();
    if fractions.is_empty() {
        return Err(invalid("TOR study needs at least one fraction"));
    }
    fractions.sort_by(f64::total_cmp);
    slices(corpus)
        .iter()
        .map(|s| {
            let reference = cv(cfg, corpus, s, &s.arrays, Approach::Taxel, None, cfg.knn.k)?
                .result
                .accuracy;
            let points: Vec<TorPoint> = fractions
                .iter()
                .map(|&f| {
                    Ok(TorPoint {
                        fraction: f,
                        accuracy: cv(cfg, corpus, s, &s.arrays, Approach::Glcm3d, Some(f), cfg.knn.k)?
                            .result
                            .accuracy,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(TorRow {
                velocity_mm_s: s.velocity,
                taxel_reference: reference,
                smallest_matching_fraction: points.iter().find(|p| p.accuracy >= reference).map(|p| p.fraction),
                points,
            })
        })
        .collect()
}

pub fn run_velocity_invariance_study(cfg: &ExperimentConfig, corpus: &Corpus) -> Result<Vec<VelocityRow>> {
    if corpus.velocities.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "velocity invariance needs at least three velocities, found {}",
            corpus.velocities.len()
        )));
    }
    let held_out: Vec<usize> = if cfg.velocity_split.test_velocities.is_empty() {
        (0..corpus.velocities.len()).collect()
    } else {
        cfg.velocity_split
            .test_velocities
            .iter()
            .map(|&v| corpus.velocity_index(v))
            .collect::<Result<_>>()?
    };
    held_out
        .iter()
        .map(|&vi| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..corpus.trials.len()).partition(|&i| corpus.trials[i].velocity_index == vi);
            let (taxel_cm, _) = evaluate_fixed_split(cfg, corpus, &train, &test, Approach::Taxel)?;
            let (glcm_cm, q) = evaluate_fixed_split(cfg, corpus, &train, &test, Approach::Glcm3d)?;
            let (ta, ga) = (taxel_cm.accuracy(), glcm_cm.accuracy());
            Ok(VelocityRow {
                test_velocity_mm_s: corpus.velocities[vi],
                train_velocities_mm_s: corpus
                    .velocities
                    .iter()
                    .copied()
                    .filter(|&v| !same_velocity(v, corpus.velocities[vi]))
                    .collect(),
                train_trials: train.len(),
                test_trials: test.len(),
                taxel: SplitSummary {
                    accuracy: ta,
                    confusion: taxel_cm.counts,
                    quantizer: None,
                },
                glcm3d: SplitSummary {
                    accuracy: ga,
                    confusion: glcm_cm.counts,
                    quantizer: q,
                },
                change_pct: change_pct(ga, ta),
            })
        })
        .collect()
}

/// ISI histograms across gains. Traces are regenerated/reloaded because the
/// corpus only keeps spikes at the configured gain.
pub fn run_gain_sweep(cfg: &ExperimentConfig, velocities: &[f64]) -> Result<GainSweepResult> {
    let gs = &cfg.gain_sweep;
    let velocity = match gs.velocity {
        Some(v) => v,
        None => *velocities
            .first()
            .ok_or_else(|| Error::InsufficientData("no velocities to sweep".into()))?,
    };
    let traces = preprocessed_traces_at(cfg, velocity, gs.trials_per_label)?;
    if traces.is_empty() {
        return Err(invalid(format!("no traces at velocity {velocity}")));
    }
    Ok(GainSweepResult {
        velocity_mm_s: velocity,
        trials_per_label: gs.trials_per_label,
        histograms: isi_histogram_sweep(&traces, &gs.gains, &cfg.neuron, gs.bin_width_s)?,
    })
}

/// Runs one experiment (or all of them) over an already-built corpus.
pub fn run_on_corpus(which: Experiment, cfg: &ExperimentConfig, corpus: &Corpus) -> Result<ExperimentReport> {
    let mut report = ExperimentReport {
        experiment: which,
        master_seed: cfg.seed,
        synthetic: corpus.synthetic,
        labels: corpus.labels.clone(),
        velocities_mm_s: corpus.velocities.clone(),
        config: cfg.clone(),
        accuracy: None,
        perturbation: None,
        temporal: None,
        tor: None,
        velocity: None,
        gain_sweep: None,
    };
    if which.includes(Experiment::Accuracy) {
        report.accuracy = Some(run_accuracy_comparison(cfg, corpus)?);
    }
    if which.includes(Experiment::Perturbation) {
        report.perturbation = Some(run_perturbation_study(cfg, corpus)?);
    }
    if which.includes(Experiment::Temporal) {
        report.temporal = Some(run_temporal_collapse_study(cfg, corpus)?);
    }
    if which.includes(Experiment::Tor) {
        report.tor = Some(run_tor_study(cfg, corpus)?);
    }
    if which.includes(Experiment::Velocity) {
        report.velocity = Some(run_velocity_invariance_study(cfg, corpus)?);
    }
    if which.includes(Experiment::GainSweep) {
        report.gain_sweep = Some(run_gain_sweep(cfg, &corpus.velocities)?);
    }
    Ok(report)
}

/// Builds the corpus described by `cfg` and runs the selected experiment.
pub fn run(which: Experiment, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let corpus = Corpus::build(cfg)?;
    run_on_corpus(which, cfg, &corpus)
}
