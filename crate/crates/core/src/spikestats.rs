//! Single-taxel spike statistics: mean spiking rate, ISI coefficient of
//! variation, Fano factor, and PSTHs.
//!
//! Variances and standard deviations are population (divide-by-n) estimates.
//! Statistics that need more spikes than a train holds come back as `None`
//! rather than as an error; [`SingleTaxelFeatures::vector`] imputes them as 0.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::neuron::{SpikeArray, SpikeTrain};

pub const DEFAULT_FANO_WINDOW_S: f64 = 0.5;

/// Spike count divided by train duration (Hz).
pub fn msr(train: &SpikeTrain) -> Result<f64> {
    if !(train.duration_s() > 0.0) {
        return Err(invalid("mean spiking rate of a zero-length train"));
    }
    Ok(train.len() as f64 / train.duration_s())
}

fn mean_and_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Standard deviation over mean of the ISIs; `None` with fewer than two ISIs.
pub fn cv_isi(train: &SpikeTrain) -> Option<f64> {
    let isis = train.isis();
    if isis.len() < 2 {
        return None;
    }
    let (mean, var) = mean_and_variance(&isis);
    Some(var.sqrt() / mean)
}

/// Number of whole windows of `window_s` that fit in `duration_s`.
pub(crate) fn whole_bins(duration_s: f64, window_s: f64) -> usize {
    (duration_s / window_s + 1e-9).floor() as usize
}

/// Per-window spike counts over non-overlapping windows tiling the train;
/// a trailing partial window is dropped.
pub fn window_counts(train: &SpikeTrain, window_s: f64) -> Vec<usize> {
    train.binned_counts(window_s, whole_bins(train.duration_s(), window_s))
}

/// Variance over mean of windowed spike counts.
///
/// Errors when the window is not positive or fewer than two windows fit;
/// `Ok(None)` when the mean count is zero.
pub fn fano(train: &SpikeTrain, window_s: f64) -> Result<Option<f64>> {
    if !(window_s > 0.0) {
        return Err(invalid("Fano window must be > 0"));
    }
    let counts = window_counts(train, window_s);
    if counts.len() < 2 {
        return Err(invalid(format!(
            "Fano factor needs at least two windows of {window_s} s in {} s",
            train.duration_s()
        )));
    }
    Ok(fano_of_counts(&counts))
}

pub fn fano_of_counts(counts: &[usize]) -> Option<f64> {
    let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mean, var) = mean_and_variance(&xs);
    (mean > 0.0).then(|| var / mean)
}

/// Trial-averaged firing rate per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psth {
    pub bin_s: f64,
    pub trials: usize,
    /// Summed spike counts per bin across trials.
    pub counts: Vec<usize>,
    pub rates_hz: Vec<f64>,
}

/// PSTH over repeated trials. The last bin may extend past the trial end so
/// that every spike is counted.
pub fn psth(trains: &[SpikeTrain], bin_s: f64) -> Result<Psth> {
    let first = trains.first().ok_or_else(|| invalid("PSTH of zero trials"))?;
    if !(bin_s > 0.0) {
        return Err(invalid("PSTH bin must be > 0"));
    }
    let duration = first.duration_s();
    if trains.iter().any(|t| t.duration_s() != duration) {
        return Err(invalid("PSTH trials must share one duration"));
    }
    let nbins = ((duration / bin_s - 1e-9).ceil() as usize).max(1);
    let mut counts = vec![0usize; nbins];
    for train in trains {
        for &t in train.times() {
            let b = ((t / bin_s + 1e-9).floor() as usize).min(nbins - 1);
            counts[b] += 1;
        }
    }
    let scale = 1.0 / (trains.len() as f64 * bin_s);
    Ok(Psth {
        bin_s,
        trials: trains.len(),
        rates_hz: counts.iter().map(|&c| c as f64 * scale).collect(),
        counts,
    })
}

/// Feature triple for one taxel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleTaxelFeatures {
    pub taxel_index: usize,
    pub window_s: f64,
    pub msr_hz: f64,
    pub cv_isi: Option<f64>,
    pub fano: Option<f64>,
}

impl SingleTaxelFeatures {
    pub fn compute(train: &SpikeTrain, taxel_index: usize, window_s: f64) -> Result<Self> {
        Ok(SingleTaxelFeatures {
            taxel_index,
            window_s,
            msr_hz: msr(train)?,
            cv_isi: cv_isi(train),
            fano: fano(train, window_s)?,
        })
    }

    /// `[msr, cv_isi, fano]` with undefined entries set to 0.
    pub fn vector(&self) -> Vec<f64> {
        vec![self.msr_hz, self.cv_isi.unwrap_or(0.0), self.fano.unwrap_or(0.0)]
    }

    pub fn all_defined(&self) -> bool {
        self.cv_isi.is_some() && self.fano.is_some()
    }

    /// One character per feature (msr, cv_isi, fano): `1` defined, `0` imputed.
    pub fn defined_flags(&self) -> String {
        let bit = |b: bool| if b { '1' } else { '0' };
        [true, self.cv_isi.is_some(), self.fano.is_some()]
            .into_iter()
            .map(bit)
            .collect()
    }
}

/// Features of the taxel at `(row, col)`.
pub fn single_taxel_features(
    spikes: &SpikeArray,
    row: usize,
    col: usize,
    window_s: f64,
) -> Result<SingleTaxelFeatures> {
    let g = spikes.geometry;
    if row >= g.rows || col >= g.cols {
        return Err(invalid(format!(
            "taxel ({row}, {col}) outside the {}x{} grid",
            g.rows, g.cols
        )));
    }
    let idx = g.index(row, col);
    SingleTaxelFeatures::compute(&spikes.trains[idx], idx, window_s)
}

pub const FEATURE_NAMES: [&str; 3] = ["msr", "cv_isi", "fano"];
