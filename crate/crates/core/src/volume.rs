//! Spatio-temporal response volumes.
//!
//! A volume has one voxel per (row, col, time bin). Voxel intensity is the
//! taxel's mean spiking rate over that bin, in Hz. Axis naming follows the
//! co-occurrence offsets: `x` is the grid row, `y` the grid column (the
//! sliding axis) and `z` the time bin.

use std::io::Write;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::neuron::SpikeArray;
use crate::seed;
use crate::signal::GridGeometry;
use crate::spikestats::whole_bins;

pub const DEFAULT_BIN_S: f64 = 0.2;
pub const DEFAULT_LEVELS: usize = 8;

/// Dimensions shared by real-valued and quantized volumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
    pub t_bins: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.rows * self.cols * self.t_bins
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index; storage is slab-major so a time prefix is a contiguous
    /// prefix of the buffer.
    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.rows + x) * self.cols + y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVolume {
    pub shape: Shape,
    pub values: Vec<f64>,
    pub bin_s: f64,
    pub geometry: GridGeometry,
    pub label: String,
    pub velocity_mm_s: f64,
    pub trial_id: u32,
}

impl ResponseVolume {
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.shape.index(x, y, z)]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    fn with_values(&self, t_bins: usize, values: Vec<f64>) -> ResponseVolume {
        ResponseVolume {
            shape: Shape { t_bins, ..self.shape },
            values,
            bin_s: self.bin_s,
            geometry: self.geometry,
            label: self.label.clone(),
            velocity_mm_s: self.velocity_mm_s,
            trial_id: self.trial_id,
        }
    }
}

/// Bins every taxel's spikes into `bin_s` slabs; the trailing partial bin is
/// dropped.
pub fn build_volume(spikes: &SpikeArray, bin_s: f64) -> Result<ResponseVolume> {
    if !(bin_s > 0.0) {
        return Err(invalid("voxel depth must be > 0"));
    }
    spikes.validate()?;
    let duration = spikes.duration_s();
    let t_bins = whole_bins(duration, bin_s);
    if t_bins == 0 {
        return Err(invalid(format!(
            "trial of {duration} s is shorter than one {bin_s} s voxel"
        )));
    }
    let g = spikes.geometry;
    let shape = Shape {
        rows: g.rows,
        cols: g.cols,
        t_bins,
    };
    let mut values = vec![0.0; shape.len()];
    for (i, train) in spikes.trains.iter().enumerate() {
        let (x, y) = g.position(i);
        for (z, c) in train.binned_counts(bin_s, t_bins).into_iter().enumerate() {
            values[shape.index(x, y, z)] = c as f64 / bin_s;
        }
    }
    Ok(ResponseVolume {
        shape,
        values,
        bin_s,
        geometry: g,
        label: spikes.label.clone(),
        velocity_mm_s: spikes.velocity_mm_s,
        trial_id: spikes.trial_id,
    })
}

/// Linear gray-level map over `[lo, hi]` with `num_levels` equal bins;
/// values outside the range clamp to the end levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub lo: f64,
    pub hi: f64,
    pub num_levels: usize,
}

impl Quantizer {
    pub fn new(lo: f64, hi: f64, num_levels: usize) -> Result<Self> {
        if num_levels < 2 || num_levels > u16::MAX as usize {
            return Err(invalid(format!("gray levels must lie in [2, 65535], got {num_levels}")));
        }
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Degenerate(format!("quantizer range [{lo}, {hi}] is empty")));
        }
        Ok(Quantizer { lo, hi, num_levels })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.num_levels as f64
    }

    #[inline]
    pub fn level(&self, value: f64) -> u16 {
        let l = ((value - self.lo) / self.width()).floor();
        if l <= 0.0 {
            0
        } else {
            (l as usize).min(self.num_levels - 1) as u16
        }
    }

    /// Midpoint of a level's bin.
    pub fn center(&self, level: u16) -> f64 {
        self.lo + (level as f64 + 0.5) * self.width()
    }
}

/// `lo = 0`, `hi` = the largest voxel over the training volumes.
pub fn fit_quantizer(training: &[ResponseVolume], num_levels: usize) -> Result<Quantizer> {
    if training.is_empty() {
        return Err(invalid("cannot fit a quantizer to zero volumes"));
    }
    let hi = training.iter().map(ResponseVolume::max_value).fold(0.0, f64::max);
    Quantizer::new(0.0, hi, num_levels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedVolume {
    pub shape: Shape,
    pub levels: Vec<u16>,
    pub num_levels: usize,
}

impl QuantizedVolume {
    pub fn new(shape: Shape, levels: Vec<u16>, num_levels: usize) -> Result<Self> {
        if levels.len() != shape.len() {
            return Err(invalid("level buffer does not match the volume shape"));
        }
        if levels.iter().any(|&l| l as usize >= num_levels) {
            return Err(invalid("gray level outside [0, N-1]"));
        }
        Ok(QuantizedVolume {
            shape,
            levels,
            num_levels,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.levels[self.shape.index(x, y, z)]
    }
}

pub fn quantize(vol: &ResponseVolume, q: &Quantizer) -> QuantizedVolume {
    QuantizedVolume {
        shape: vol.shape,
        levels: vol.values.iter().map(|&v| q.level(v)).collect(),
        num_levels: q.num_levels,
    }
}

/// Moves `n` randomly chosen taxels to each other's positions.
///
/// The chosen positions are permuted by a uniformly drawn derangement, so
/// every chosen taxel lands somewhere new. Spike timing is untouched.
pub fn perturb_spatial(spikes: &SpikeArray, n: usize, seed: u64) -> Result<SpikeArray> {
    let total = spikes.trains.len();
    if n < 2 || n > total {
        return Err(invalid(format!("perturbation size must lie in [2, {total}], got {n}")));
    }
    let mut rng = seed::rng(seed);
    let chosen = sample(&mut rng, total, n).into_vec();
    // Rejection sampling is uniform over derangements; about e tries each.
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            break;
        }
    }
    let mut out = spikes.clone();
    for (i, &p) in perm.iter().enumerate() {
        out.trains[chosen[p]] = spikes.trains[chosen[i]].clone();
    }
    Ok(out)
}

/// Averages each taxel over time into a single slab.
pub fn collapse_time(vol: &ResponseVolume) -> ResponseVolume {
    let s = vol.shape;
    let mut values = vec![0.0; s.rows * s.cols];
    for z in 0..s.t_bins {
        for x in 0..s.rows {
            for y in 0..s.cols {
                values[x * s.cols + y] += vol.get(x, y, z);
            }
        }
    }
    values.iter_mut().for_each(|v| *v /= s.t_bins as f64);
    vol.with_values(1, values)
}

/// Keeps the first `floor(fraction · t_bins)` slabs.
pub fn truncate_time(vol: &ResponseVolume, fraction: f64) -> Result<ResponseVolume> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let keep = (fraction * vol.shape.t_bins as f64 + 1e-9).floor() as usize;
    let keep = keep.min(vol.shape.t_bins);
    if keep == 0 {
        return Err(invalid(format!(
            "fraction {fraction} of {} slabs keeps nothing",
            vol.shape.t_bins
        )));
    }
    let n = keep * vol.shape.rows * vol.shape.cols;
    Ok(vol.with_values(keep, vol.values[..n].to_vec()))
}

/// Debug dump: `r,c,k,msr,level` (level column empty without a quantizer).
pub fn write_volume_csv<W: Write>(vol: &ResponseVolume, quantizer: Option<&Quantizer>, mut out: W) -> Result<()> {
    writeln!(out, "r,c,k,msr,level")?;
    let s = vol.shape;
    for x in 0..s.rows {
        for y in 0..s.cols {
            for z in 0..s.t_bins {
                let v = vol.get(x, y, z);
                match quantizer {
                    Some(q) => writeln!(out, "{x},{y},{z},{v},{}", q.level(v))?,
                    None => writeln!(out, "{x},{y},{z},{v},")?,
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::SpikeTrain;

    fn array(trains: Vec<SpikeTrain>, rows: usize, cols: usize) -> SpikeArray {
        SpikeArray {
            trains,
            geometry: GridGeometry::new(rows, cols, 3.25, 4.0).unwrap(),
            label: "a".into(),
            velocity_mm_s: 5.0,
            trial_id: 0,
            synthetic: true,
        }
    }

    #[test]
    fn empty_array_gives_zero_volume() {
        let arr = array(vec![SpikeTrain::empty(4.0); 16], 4, 4);
        let v = build_volume(&arr, 0.2).unwrap();
        assert_eq!(
            v.shape,
            Shape {
                rows: 4,
                cols: 4,
                t_bins: 20
            }
        );
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_taxel_voxels() {
        let mut trains = vec![SpikeTrain::empty(1.0); 4];
        trains[3] = SpikeTrain::new(vec![0.05, 0.10, 0.25], 1.0).unwrap();
        let v = build_volume(&array(trains, 2, 2), 0.2).unwrap();
        let col: Vec<f64> = (0..5).map(|z| v.get(1, 1, z)).collect();
        assert_eq!(col, vec![10.0, 5.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn edge_aligned_spike_lands_in_later_bin() {
        let trains = vec![SpikeTrain::new(vec![0.6], 1.0).unwrap()];
        let v = build_volume(&array(trains, 1, 1), 0.2).unwrap();
        assert_eq!(v.get(0, 0, 3), 5.0);
    }

    #[test]
    fn short_trial_is_rejected() {
        let arr = array(vec![SpikeTrain::empty(0.1)], 1, 1);
        assert!(build_volume(&arr, 0.2).is_err());
    }

    #[test]
    fn quantizer_hand_values() {
        let q = Quantizer::new(0.0, 40.0, 8).unwrap();
        assert_eq!(q.width(), 5.0);
        assert_eq!(q.level(12.0), 2);
        assert_eq!(q.level(40.0), 7);
        assert_eq!(q.level(1e6), 7);
        assert_eq!(q.level(-3.0), 0);
        assert!(Quantizer::new(0.0, 0.0, 8).is_err());
        assert!(Quantizer::new(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn fit_rejects_all_zero_training() {
        let arr = array(vec![SpikeTrain::empty(1.0)], 1, 1);
        let v = build_volume(&arr, 0.2).unwrap();
        assert!(matches!(fit_quantizer(&[v], 8), Err(Error::Degenerate(_))));
        assert!(fit_quantizer(&[], 8).is_err());
    }

    #[test]
    fn pair_perturbation_swaps() {
        let trains: Vec<SpikeTrain> = (0..4)
            .map(|i| SpikeTrain::new(vec![0.1 * (i + 1) as f64], 1.0).unwrap())
            .collect();
        let arr = array(trains, 2, 2);
        let out = perturb_spatial(&arr, 2, 5).unwrap();
        let moved: Vec<usize> = (0..4).filter(|&i| out.trains[i] != arr.trains[i]).collect();
        assert_eq!(moved.len(), 2);
        assert_eq!(out.trains[moved[0]], arr.trains[moved[1]]);
        assert_eq!(out.trains[moved[1]], arr.trains[moved[0]]);
        assert!(perturb_spatial(&arr, 1, 5).is_err());
        assert!(perturb_spatial(&arr, 5, 5).is_err());
    }

    #[test]
    fn collapse_and_truncate() {
        let arr = array(vec![SpikeTrain::new(vec![0.0, 0.05, 0.25, 0.65], 0.8).unwrap()], 1, 1);
        let v = build_volume(&arr, 0.2).unwrap();
        assert_eq!(v.values, vec![10.0, 5.0, 0.0, 5.0]);
        let c = collapse_time(&v);
        assert_eq!(c.values, vec![5.0]);
        assert_eq!(collapse_time(&c), c);
        assert_eq!(truncate_time(&v, 1.0).unwrap(), v);
        assert_eq!(truncate_time(&v, 0.5).unwrap().values, vec![10.0, 5.0]);
        assert!(truncate_time(&v, 0.1).is_err());
        assert!(truncate_time(&v, 0.0).is_err());
    }

    #[test]
    fn truncation_floor() {
        let arr = array(vec![SpikeTrain::empty(18.0)], 1, 1);
        let v = build_volume(&arr, 0.2).unwrap();
        assert_eq!(v.shape.t_bins, 90);
        assert_eq!(truncate_time(&v, 0.3).unwrap().shape.t_bins, 27);
    }
}
