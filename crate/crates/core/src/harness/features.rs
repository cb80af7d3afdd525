//! Feature extraction over a corpus, with fold-local quantizer fitting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, TaxelParams};
use super::corpus::Corpus;
use crate::classify::{cross_validate_with, evaluate_split, ConfusionMatrix, CvResult};
use crate::error::Result;
use crate::glcm::{glcm_features, GlcmMode, OffsetVector};
use crate::neuron::SpikeArray;
use crate::spikestats::single_taxel_features;
use crate::volume::{build_volume, fit_quantizer, truncate_time, Quantizer, ResponseVolume};

/// Which feature pipeline an accuracy belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Taxel,
    Glcm2d,
    Glcm3d,
}

impl Approach {
    pub fn as_str(&self) -> &'static str {
        match self {
            Approach::Taxel => "taxel",
            Approach::Glcm2d => "glcm2d",
            Approach::Glcm3d => "glcm3d",
        }
    }

    pub fn glcm_mode(&self) -> Option<GlcmMode> {
        match self {
            Approach::Taxel => None,
            Approach::Glcm2d => Some(GlcmMode::Glcm2d),
            Approach::Glcm3d => Some(GlcmMode::Glcm3d),
        }
    }
}

pub fn taxel_vector(spikes: &SpikeArray, p: &TaxelParams) -> Result<Vec<f64>> {
    Ok(single_taxel_features(spikes, p.row, p.col, p.fano_window_s)?.vector())
}

/// Volumes of the given spike arrays, prepared for `mode` and optionally
/// truncated to a fraction of the sliding time.
pub fn prepared_volumes(
    arrays: &[&SpikeArray],
    bin_s: f64,
    mode: GlcmMode,
    fraction: Option<f64>,
) -> Result<Vec<ResponseVolume>> {
    arrays
        .par_iter()
        .map(|a| {
            let mut v = build_volume(a, bin_s)?;
            if let Some(f) = fraction {
                v = truncate_time(&v, f)?;
            }
            Ok(mode.prepare(&v))
        })
        .collect()
}

/// Haralick vectors of already-prepared volumes under one quantizer.
pub fn haralick_rows(volumes: &[&ResponseVolume], q: &Quantizer, offsets: &[OffsetVector]) -> Result<Vec<Vec<f64>>> {
    // Volumes are already prepared, so 3D mode leaves them as they are.
    volumes
        .par_iter()
        .map(|v| Ok(glcm_features(v, GlcmMode::Glcm3d, q, offsets)?.vector()))
        .collect()
}

/// Cross-validated accuracy of one approach over a set of trials, plus the
/// quantizer fitted in each fold (empty for the taxel approach).
pub struct CvRun {
    pub result: CvResult,
    pub quantizers: Vec<Quantizer>,
}

/// Cross-validates `approach` on the given arrays. GLCM quantizers are fitted
/// on each fold's training volumes only.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate_arrays(
    cfg: &ExperimentConfig,
    labels: &[String],
    arrays: &[&SpikeArray],
    trial_labels: &[usize],
    approach: Approach,
    fraction: Option<f64>,
    fold_seed: u64,
    k: usize,
) -> Result<CvRun> {
    let knn = &cfg.knn;
    match approach.glcm_mode() {
        None => {
            let rows: Vec<Vec<f64>> = arrays
                .iter()
                .map(|a| taxel_vector(a, &cfg.single_taxel))
                .collect::<Result<_>>()?;
            let pick = |idx: &[usize]| idx.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>();
            let result = cross_validate_with(
                trial_labels,
                labels,
                k,
                knn.folds,
                fold_seed,
                knn.standardize,
                |train, test| Ok((pick(train), pick(test))),
            )?;
            Ok(CvRun {
                result,
                quantizers: Vec::new(),
            })
        }
        Some(mode) => {
            let offsets = cfg.offset_vectors()?;
            let volumes = prepared_volumes(arrays, cfg.bin_s, mode, fraction)?;
            let mut quantizers = Vec::new();
            let result = cross_validate_with(
                trial_labels,
                labels,
                k,
                knn.folds,
                fold_seed,
                knn.standardize,
                |train, test| {
                    let train_v: Vec<ResponseVolume> = train.iter().map(|&i| volumes[i].clone()).collect();
                    let q = fit_quantizer(&train_v, cfg.num_levels)?;
                    quantizers.push(q);
                    let pick = |idx: &[usize]| idx.iter().map(|&i| &volumes[i]).collect::<Vec<_>>();
                    Ok((
                        haralick_rows(&pick(train), &q, &offsets)?,
                        haralick_rows(&pick(test), &q, &offsets)?,
                    ))
                },
            )?;
            Ok(CvRun { result, quantizers })
        }
    }
}

/// Fixed train/test split evaluation (no cross-validation). Returns the
/// confusion matrix and, for GLCM approaches, the training-set quantizer.
pub fn evaluate_fixed_split(
    cfg: &ExperimentConfig,
    corpus: &Corpus,
    train: &[usize],
    test: &[usize],
    approach: Approach,
) -> Result<(ConfusionMatrix, Option<Quantizer>)> {
    let arrays = |idx: &[usize]| idx.iter().map(|&i| &corpus.trials[i].spikes).collect::<Vec<_>>();
    let ys = |idx: &[usize]| idx.iter().map(|&i| corpus.trials[i].label).collect::<Vec<_>>();
    let (train_x, test_x, q) = match approach.glcm_mode() {
        None => {
            let rows = |idx: &[usize]| -> Result<Vec<Vec<f64>>> {
                arrays(idx).iter().map(|a| taxel_vector(a, &cfg.single_taxel)).collect()
            };
            (rows(train)?, rows(test)?, None)
        }
        Some(mode) => {
            let offsets = cfg.offset_vectors()?;
            let train_v = prepared_volumes(&arrays(train), cfg.bin_s, mode, None)?;
            let test_v = prepared_volumes(&arrays(test), cfg.bin_s, mode, None)?;
            let q = fit_quantizer(&train_v, cfg.num_levels)?;
            (
                haralick_rows(&train_v.iter().collect::<Vec<_>>(), &q, &offsets)?,
                haralick_rows(&test_v.iter().collect::<Vec<_>>(), &q, &offsets)?,
                Some(q),
            )
        }
    };
    let mut cm = ConfusionMatrix::new(corpus.labels.clone());
    evaluate_split(
        &train_x,
        &ys(train),
        &test_x,
        &ys(test),
        cfg.knn.k,
        cfg.knn.standardize,
        &mut cm,
    )?;
    Ok((cm, q))
}
