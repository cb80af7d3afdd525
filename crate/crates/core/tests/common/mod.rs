#![allow(dead_code)]

use neurotex::neuron::{SpikeArray, SpikeTrain};
use neurotex::signal::GridGeometry;
use neurotex::volume::{QuantizedVolume, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 4×4 array of uniformly scattered spikes, up to `max_per_taxel` each.
pub fn random_spikes(seed: u64, duration_s: f64, max_per_taxel: usize) -> SpikeArray {
    let mut r = rng(seed);
    let geometry = GridGeometry::default();
    let trains = (0..geometry.num_taxels())
        .map(|_| {
            let n = r.random_range(0..=max_per_taxel);
            let mut t: Vec<f64> = (0..n).map(|_| r.random_range(0.0..duration_s)).collect();
            t.sort_by(f64::total_cmp);
            t.dedup();
            SpikeTrain::new(t, duration_s).unwrap()
        })
        .collect();
    SpikeArray {
        trains,
        geometry,
        label: "random".into(),
        velocity_mm_s: 10.0,
        trial_id: 0,
        synthetic: true,
    }
}

pub fn random_quantized(r: &mut ChaCha8Rng, rows: usize, cols: usize, t_bins: usize, levels: usize) -> QuantizedVolume {
    let shape = Shape { rows, cols, t_bins };
    let data = (0..shape.len()).map(|_| r.random_range(0..levels as u16)).collect();
    QuantizedVolume::new(shape, data, levels).unwrap()
}

/// Straight transcription of the co-occurrence count definition: every
/// voxel whose displaced partner lies inside the volume contributes one
/// count at (its level, partner level).
pub fn naive_glcm(vol: &QuantizedVolume, dx: i32, dy: i32, dz: i32) -> Vec<u64> {
    let n = vol.num_levels;
    let s = vol.shape;
    let mut counts = vec![0u64; n * n];
    for x in 0..s.rows as i32 {
        for y in 0..s.cols as i32 {
            for z in 0..s.t_bins as i32 {
                let (px, py, pz) = (x + dx, y + dy, z + dz);
                let inside = (0..s.rows as i32).contains(&px)
                    && (0..s.cols as i32).contains(&py)
                    && (0..s.t_bins as i32).contains(&pz);
                if inside {
                    let i = vol.get(x as usize, y as usize, z as usize) as usize;
                    let j = vol.get(px as usize, py as usize, pz as usize) as usize;
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    counts
}

/// Haralick statistics written out term by term from the textbook sums.
pub fn direct_haralick(p: &[f64], n: usize) -> (f64, f64, f64) {
    let at = |i: usize, j: usize| p[i * n + j];
    let mut mu_x = 0.0;
    let mut mu_y = 0.0;
    for i in 0..n {
        for j in 0..n {
            mu_x += i as f64 * at(i, j);
            mu_y += j as f64 * at(i, j);
        }
    }
    let mut sx2 = 0.0;
    let mut sy2 = 0.0;
    for i in 0..n {
        for j in 0..n {
            sx2 += at(i, j) * (i as f64 - mu_x).powi(2);
            sy2 += at(i, j) * (j as f64 - mu_y).powi(2);
        }
    }
    let (sx, sy) = (sx2.sqrt(), sy2.sqrt());
    let mut contrast = 0.0;
    let mut corr = 0.0;
    let mut asm = 0.0;
    for i in 0..n {
        for j in 0..n {
            contrast += at(i, j) * (i as f64 - j as f64).powi(2);
            corr += at(i, j) * (i as f64 - mu_x) * (j as f64 - mu_y) / (sx * sy);
            asm += at(i, j).powi(2);
        }
    }
    (contrast, corr, asm)
}

/// Exhaustive KNN: sort everything by (distance, index), vote among the
/// first k; ties go to the label with the nearest member, then the lower
/// label index.
pub fn brute_knn(train_x: &[Vec<f64>], train_y: &[usize], q: &[f64], k: usize) -> usize {
    let mut all: Vec<(f64, usize)> = train_x
        .iter()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let top = &all[..k];
    let labels = train_y.iter().max().unwrap() + 1;
    let mut votes = vec![0usize; labels];
    let mut nearest = vec![f64::INFINITY; labels];
    for &(d, i) in top {
        votes[train_y[i]] += 1;
        nearest[train_y[i]] = nearest[train_y[i]].min(d);
    }
    let best = *votes.iter().max().unwrap();
    (0..labels)
        .filter(|&l| votes[l] == best)
        .min_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(a.cmp(&b)))
        .unwrap()
}

/// Plain forward Euler on (v, u) with step `dt_ms`, both derivatives taken
/// at the start of the step; spike and reset once v reaches 30 mV.
/// Returns the spike count over `ms` milliseconds.
pub fn euler_izhikevich(current: f64, ms: f64, dt_ms: f64) -> usize {
    let (a, b, c, d) = (0.02, 0.2, -65.0, 8.0);
    let mut v: f64 = c;
    let mut u = b * v;
    let mut spikes = 0;
    for _ in 0..(ms / dt_ms).round() as usize {
        let dv = 0.04 * v * v + 5.0 * v + 140.0 - u + current;
        let du = a * (b * v - u);
        v += dt_ms * dv;
        u += dt_ms * du;
        if v >= 30.0 {
            spikes += 1;
            v = c;
            u += d;
        }
    }
    spikes
}
