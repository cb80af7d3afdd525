//! Three-dimensional gray-level co-occurrence matrices and the Haralick
//! contrast, correlation and angular second moment.
//!
//! For an offset `(dx, dy, dz)` the matrix counts ordered level pairs
//!
//! ```text
//! G(i, j) = #{ (x, y, z) : V(x, y, z) = i  and  V(x+dx, y+dy, z+dz) = j }
//! ```
//!
//! over voxels whose partner lies inside the volume. Matrices are not
//! symmetrized: the 13 standard directions cover a half-space, so each
//! unordered neighbour pair is visited once per distance.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::volume::{collapse_time, quantize, QuantizedVolume, Quantizer, ResponseVolume};

/// Unit direction templates, indexed by direction id − 1. Multiply by the
/// distance `D` to get the offset. The comment gives (θ, φ) in degrees.
pub const DIRECTIONS: [(i32, i32, i32); 13] = [
    (0, 1, 0),    // 1: (0, 0)
    (-1, 1, 0),   // 2: (45, 0)
    (-1, 0, 0),   // 3: (90, 0)
    (-1, -1, 0),  // 4: (135, 0)
    (0, 1, -1),   // 5: (0, 45)
    (0, 0, -1),   // 6: (0, 90)
    (0, -1, -1),  // 7: (0, 135)
    (-1, 0, -1),  // 8: (90, 45)
    (1, 0, -1),   // 9: (90, 135)
    (-1, 1, -1),  // 10: (45, 45)
    (1, -1, -1),  // 11: (45, 135)
    (-1, -1, -1), // 12: (135, 45)
    (1, 1, -1),   // 13: (135, 135)
];

pub const DEFAULT_DISTANCES: [u32; 4] = [1, 2, 4, 8];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OffsetVector {
    pub dx: i32,
    pub dy: i32,
    pub dz: i32,
    /// 1–13.
    pub direction_id: u8,
    pub distance: u32,
}

impl OffsetVector {
    pub fn new(direction_id: u8, distance: u32) -> Result<Self> {
        if !(1..=13).contains(&direction_id) || distance == 0 {
            return Err(invalid(format!(
                "offset needs direction in 1..=13 and distance >= 1, got ({direction_id}, {distance})"
            )));
        }
        let (ux, uy, uz) = DIRECTIONS[direction_id as usize - 1];
        let d = distance as i32;
        Ok(OffsetVector {
            dx: ux * d,
            dy: uy * d,
            dz: uz * d,
            direction_id,
            distance,
        })
    }

    /// True when the offset has no time component.
    pub fn in_plane(&self) -> bool {
        self.dz == 0
    }
}

/// Every direction at every distance, direction-major.
pub fn standard_offsets(distances: &[u32]) -> Result<Vec<OffsetVector>> {
    let mut out = Vec::with_capacity(13 * distances.len());
    for dir in 1..=13u8 {
        for &d in distances {
            out.push(OffsetVector::new(dir, d)?);
        }
    }
    Ok(out)
}

/// The 52 offsets: 13 directions at distances 1, 2, 4 and 8.
pub fn default_offsets() -> Vec<OffsetVector> {
    standard_offsets(&DEFAULT_DISTANCES).expect("default offsets are valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub num_levels: usize,
    /// Row-major `N × N`, `counts[i * N + j]`.
    pub counts: Vec<u64>,
    pub offset: OffsetVector,
    pub pair_count: u64,
}

impl Glcm {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.num_levels + j]
    }
}

/// Index range of `a` such that both `a` and `a + d` lie in `[0, n)`.
fn overlap(n: usize, d: i32) -> std::ops::Range<usize> {
    let n = n as i64;
    let d = d as i64;
    let lo = (-d).max(0);
    let hi = (n - d).min(n);
    if lo >= hi {
        0..0
    } else {
        lo as usize..hi as usize
    }
}

/// Co-occurrence counts of `vol` at one offset.
pub fn glcm(vol: &QuantizedVolume, offset: OffsetVector) -> Glcm {
    let n = vol.num_levels;
    let s = vol.shape;
    let mut counts = vec![0u64; n * n];
    let mut pairs = 0u64;
    let (xs, ys, zs) = (
        overlap(s.rows, offset.dx),
        overlap(s.cols, offset.dy),
        overlap(s.t_bins, offset.dz),
    );
    for z in zs {
        let pz = (z as i64 + offset.dz as i64) as usize;
        for x in xs.clone() {
            let px = (x as i64 + offset.dx as i64) as usize;
            for y in ys.clone() {
                let py = (y as i64 + offset.dy as i64) as usize;
                let i = vol.get(x, y, z) as usize;
                let j = vol.get(px, py, pz) as usize;
                counts[i * n + j] += 1;
                pairs += 1;
            }
        }
    }
    Glcm {
        num_levels: n,
        counts,
        offset,
        pair_count: pairs,
    }
}

/// Normalized average of several co-occurrence matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanGlcm {
    pub num_levels: usize,
    /// Row-major `N × N` probabilities summing to 1.
    pub p: Vec<f64>,
    pub source_pair_total: u64,
}

impl MeanGlcm {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.num_levels + j]
    }

    /// Wraps an already-normalized matrix.
    pub fn from_probabilities(num_levels: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != num_levels * num_levels || num_levels == 0 {
            return Err(invalid("probability matrix must be N x N"));
        }
        if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(invalid("probabilities must be finite and non-negative"));
        }
        Ok(MeanGlcm {
            num_levels,
            p,
            source_pair_total: 0,
        })
    }
}

/// Averages the GLCMs of all `offsets` (offsets whose partner always falls
/// outside the volume contribute zero matrices) and normalizes the mean to
/// unit mass.
pub fn mean_glcm(vol: &QuantizedVolume, offsets: &[OffsetVector]) -> Result<MeanGlcm> {
    if offsets.is_empty() {
        return Err(invalid("mean GLCM needs at least one offset"));
    }
    let n = vol.num_levels;
    let mut sum = vec![0u64; n * n];
    let mut total = 0u64;
    for &o in offsets {
        let g = glcm(vol, o);
        for (s, c) in sum.iter_mut().zip(&g.counts) {
            *s += c;
        }
        total += g.pair_count;
    }
    if total == 0 {
        return Err(Error::Degenerate(
            "no offset has an in-bounds partner; mean GLCM is undefined".into(),
        ));
    }
    let k = offsets.len() as f64;
    let mean: Vec<f64> = sum.iter().map(|&c| c as f64 / k).collect();
    let mass: f64 = mean.iter().sum();
    Ok(MeanGlcm {
        num_levels: n,
        p: mean.into_iter().map(|m| m / mass).collect(),
        source_pair_total: total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaralickFeatures {
    pub contrast: f64,
    /// `None` when a marginal has zero variance.
    pub correlation: Option<f64>,
    pub asm: f64,
}

impl HaralickFeatures {
    /// `[contrast, correlation, asm]`, undefined correlation as 0.
    pub fn vector(&self) -> Vec<f64> {
        vec![self.contrast, self.correlation.unwrap_or(0.0), self.asm]
    }
}

pub const FEATURE_NAMES: [&str; 3] = ["contrast", "correlation", "asm"];

const MASS_TOLERANCE: f64 = 1e-9;
const SIGMA_FLOOR: f64 = 1e-10;

pub fn haralick(m: &MeanGlcm) -> Result<HaralickFeatures> {
    let n = m.num_levels;
    let mass: f64 = m.p.iter().sum();
    if (mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(invalid(format!(
            "Haralick features need a normalized matrix (mass {mass})"
        )));
    }
    let mut contrast = 0.0;
    let mut asm = 0.0;
    let mut mu_x = 0.0;
    let mut mu_y = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = m.get(i, j);
            let d = i as f64 - j as f64;
            contrast += p * d * d;
            asm += p * p;
            mu_x += i as f64 * p;
            mu_y += j as f64 * p;
        }
    }
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    let mut cov = 0.0;
    for i in 0..n {
        for j in 0..n {
            let p = m.get(i, j);
            let di = i as f64 - mu_x;
            let dj = j as f64 - mu_y;
            var_x += p * di * di;
            var_y += p * dj * dj;
            cov += p * di * dj;
        }
    }
    let sigma = var_x.sqrt() * var_y.sqrt();
    Ok(HaralickFeatures {
        contrast,
        correlation: (sigma > SIGMA_FLOOR).then(|| cov / sigma),
        asm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlcmMode {
    /// Full spatio-temporal volume.
    Glcm3d,
    /// Time axis collapsed to one slab of whole-trial rates.
    Glcm2d,
}

impl GlcmMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GlcmMode::Glcm3d => "glcm3d",
            GlcmMode::Glcm2d => "glcm2d",
        }
    }

    /// The volume the features are computed from in this mode.
    pub fn prepare(&self, vol: &ResponseVolume) -> ResponseVolume {
        match self {
            GlcmMode::Glcm3d => vol.clone(),
            GlcmMode::Glcm2d => collapse_time(vol),
        }
    }
}

/// Full feature path for one trial's volume: mode-specific preparation,
/// quantization, mean GLCM and Haralick features. The quantizer must have
/// been fitted on volumes prepared the same way.
pub fn glcm_features(
    vol: &ResponseVolume,
    mode: GlcmMode,
    quantizer: &Quantizer,
    offsets: &[OffsetVector],
) -> Result<HaralickFeatures> {
    let prepared = mode.prepare(vol);
    haralick(&mean_glcm(&quantize(&prepared, quantizer), offsets)?)
}
