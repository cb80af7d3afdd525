//! Analog tactile traces: data model, CSV ingest, a synthetic sliding-contact
//! generator and the preprocessing stage (low-pass + global normalization).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed;

/// Layout of the taxel grid. Channels are always stored row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Center-to-center taxel spacing.
    pub pitch_mm: f64,
    pub taxel_area_mm2: f64,
}

impl Default for GridGeometry {
    /// 4×4 grid over a 169 mm² active area with 4 mm² taxels.
    fn default() -> Self {
        GridGeometry::from_active_area(4, 4, 169.0, 4.0).expect("default geometry is valid")
    }
}

impl GridGeometry {
    pub fn new(rows: usize, cols: usize, pitch_mm: f64, taxel_area_mm2: f64) -> Result<Self> {
        let g = GridGeometry {
            rows,
            cols,
            pitch_mm,
            taxel_area_mm2,
        };
        g.validate()?;
        Ok(g)
    }

    /// Square active area tiled uniformly: pitch = sqrt(area) / cols.
    pub fn from_active_area(rows: usize, cols: usize, active_area_mm2: f64, taxel_area_mm2: f64) -> Result<Self> {
        if !(active_area_mm2 > 0.0) || cols == 0 {
            return Err(invalid("active area and column count must be positive"));
        }
        GridGeometry::new(rows, cols, active_area_mm2.sqrt() / cols as f64, taxel_area_mm2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(invalid("grid must have at least one row and one column"));
        }
        if !(self.pitch_mm > 0.0) || !self.pitch_mm.is_finite() {
            return Err(invalid(format!("pitch_mm must be > 0, got {}", self.pitch_mm)));
        }
        Ok(())
    }

    pub fn num_taxels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn position(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Column header used by the trace CSV for taxel `(row, col)`.
    pub fn taxel_name(&self, row: usize, col: usize) -> String {
        if self.rows <= 10 && self.cols <= 10 {
            format!("tx{row}{col}")
        } else {
            format!("tx{row}_{col}")
        }
    }
}

/// Sample indices at which each protocol phase starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseMarkers {
    pub contact: usize,
    pub hold: usize,
    pub slide: usize,
    pub retract: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorTrace {
    pub geometry: GridGeometry,
    pub sample_rate_hz: f64,
    /// `[taxel][sample]`, taxels row-major.
    pub channels: Vec<Vec<f64>>,
    pub label: String,
    pub velocity_mm_s: f64,
    pub trial_id: u32,
    pub phase_markers: Option<PhaseMarkers>,
    /// Set for generator output; carried into every export.
    pub synthetic: bool,
}

impl SensorTrace {
    pub fn new(
        geometry: GridGeometry,
        sample_rate_hz: f64,
        channels: Vec<Vec<f64>>,
        label: impl Into<String>,
        velocity_mm_s: f64,
        trial_id: u32,
    ) -> Result<Self> {
        let trace = SensorTrace {
            geometry,
            sample_rate_hz,
            channels,
            label: label.into(),
            velocity_mm_s,
            trial_id,
            phase_markers: None,
            synthetic: false,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(invalid(format!("sample rate must be > 0, got {}", self.sample_rate_hz)));
        }
        let expected = self.geometry.num_taxels();
        if self.channels.len() != expected {
            return Err(Error::ChannelCountMismatch {
                line: 0,
                expected,
                found: self.channels.len(),
            });
        }
        let len = self.channels[0].len();
        if len == 0 {
            return Err(invalid("channels must hold at least one sample"));
        }
        for (i, ch) in self.channels.iter().enumerate() {
            if ch.len() != len {
                return Err(invalid(format!("channel {i} has {} samples, expected {len}", ch.len())));
            }
            if let Some(k) = ch.iter().position(|v| !v.is_finite()) {
                return Err(invalid(format!("channel {i} sample {k} is not finite")));
            }
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        self.channels[0].len()
    }

    pub fn duration_s(&self) -> f64 {
        self.num_samples() as f64 / self.sample_rate_hz
    }

    /// Restricts the trace to the sliding phase when phase markers are present.
    pub fn sliding_phase(&self) -> Result<SensorTrace> {
        let Some(m) = self.phase_markers else {
            return Ok(self.clone());
        };
        let end = m.retract.min(self.num_samples());
        if m.slide >= end {
            return Err(invalid(format!(
                "empty sliding phase (slide={}, retract={})",
                m.slide, m.retract
            )));
        }
        let mut out = self.clone();
        out.channels = self.channels.iter().map(|c| c[m.slide..end].to_vec()).collect();
        out.phase_markers = None;
        Ok(out)
    }
}

fn default_harmonics() -> Vec<f64> {
    vec![1.0]
}

fn default_roughness_scale() -> f64 {
    0.5
}

/// Parameters of a synthetic texture's 1-D height profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureParams {
    pub spatial_period_mm: f64,
    pub amplitude: f64,
    /// Relative amplitudes of harmonics 1, 2, 3, ... of the spatial period.
    #[serde(default = "default_harmonics")]
    pub harmonic_weights: Vec<f64>,
    #[serde(default)]
    pub roughness_noise_sd: f64,
    /// Correlation length of the frozen roughness noise.
    #[serde(default = "default_roughness_scale")]
    pub roughness_scale_mm: f64,
    #[serde(default)]
    pub baseline: f64,
    #[serde(default)]
    pub profile_seed: u64,
    /// Each trial starts at a uniformly drawn position in `[0, start_jitter_mm)`.
    #[serde(default)]
    pub start_jitter_mm: f64,
    /// Relative standard deviation of the per-trial contact amplitude.
    #[serde(default)]
    pub amplitude_jitter: f64,
    /// Relative standard deviation of the actual sliding speed of a trial
    /// around the nominal one. The trial still lasts `distance / nominal`.
    #[serde(default)]
    pub speed_jitter: f64,
}

impl Default for TextureParams {
    /// A plain sinusoidal grating at the taxel pitch.
    fn default() -> Self {
        TextureParams {
            spatial_period_mm: 3.25,
            amplitude: 0.5,
            harmonic_weights: default_harmonics(),
            roughness_noise_sd: 0.0,
            roughness_scale_mm: default_roughness_scale(),
            baseline: 0.0,
            profile_seed: 0,
            start_jitter_mm: 0.0,
            amplitude_jitter: 0.0,
            speed_jitter: 0.0,
        }
    }
}

impl TextureParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.spatial_period_mm > 0.0) {
            return Err(invalid("spatial_period_mm must be > 0"));
        }
        if !(self.amplitude >= 0.0 && self.amplitude <= 1.0) {
            return Err(invalid("amplitude must lie in [0, 1]"));
        }
        if !(self.roughness_noise_sd >= 0.0) || !(self.roughness_scale_mm > 0.0) {
            return Err(invalid("roughness sd must be >= 0 and its scale > 0"));
        }
        if self.baseline < 0.0 || self.baseline + self.amplitude > 1.0 + 1e-12 {
            return Err(invalid("baseline must be >= 0 and baseline + amplitude <= 1"));
        }
        if !(self.start_jitter_mm >= 0.0) || !(self.amplitude_jitter >= 0.0) || !(self.speed_jitter >= 0.0) {
            return Err(invalid("trial jitters must be >= 0"));
        }
        if self.harmonic_weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("harmonic weights must be finite"));
        }
        Ok(())
    }
}

/// Frozen texture profile `h(x)`, realized over `[0, length_mm]`.
#[derive(Debug, Clone)]
pub struct TextureProfile {
    params: TextureParams,
    phases: Vec<f64>,
    harmonic_norm: f64,
    roughness: Vec<f64>,
}

impl TextureProfile {
    pub fn new(params: &TextureParams, length_mm: f64) -> Result<Self> {
        params.validate()?;
        let mut rng = seed::rng(params.profile_seed);
        let phases: Vec<f64> = params
            .harmonic_weights
            .iter()
            .map(|_| rng.random::<f64>() * 2.0 * PI)
            .collect();
        let harmonic_norm: f64 = params.harmonic_weights.iter().map(|w| w.abs()).sum();
        let knots = (length_mm.max(0.0) / params.roughness_scale_mm).ceil() as usize + 2;
        let roughness = if params.roughness_noise_sd > 0.0 {
            let normal = Normal::new(0.0, params.roughness_noise_sd).map_err(|e| invalid(e.to_string()))?;
            (0..knots).map(|_| normal.sample(&mut rng)).collect()
        } else {
            vec![0.0; knots]
        };
        Ok(TextureProfile {
            params: params.clone(),
            phases,
            harmonic_norm,
            roughness,
        })
    }

    /// Unscaled shape in roughly `[0, 1]`: harmonic sum mapped from `[-1, 1]`
    /// plus interpolated roughness.
    fn shape(&self, x_mm: f64) -> f64 {
        let p = &self.params;
        let mut harm = 0.0;
        if self.harmonic_norm > 0.0 {
            for (k, (w, phi)) in p.harmonic_weights.iter().zip(&self.phases).enumerate() {
                harm += w * (2.0 * PI * (k + 1) as f64 * x_mm / p.spatial_period_mm + phi).sin();
            }
            harm /= self.harmonic_norm;
        }
        let pos = (x_mm / p.roughness_scale_mm).max(0.0);
        let i = (pos.floor() as usize).min(self.roughness.len() - 2);
        let frac = (pos - i as f64).min(1.0);
        let rough = self.roughness[i] * (1.0 - frac) + self.roughness[i + 1] * frac;
        0.5 * (1.0 + harm) + rough
    }

    /// `h(x)` at the nominal amplitude.
    pub fn height(&self, x_mm: f64) -> f64 {
        self.params.baseline + self.params.amplitude * self.shape(x_mm)
    }
}

/// Synthesizes the sliding phase of one trial.
///
/// Taxel `(r, c)` reads `h(velocity·t + c·pitch + x0)` where `x0` is the
/// trial's start position, plus white measurement noise, clipped to `[0, 1]`.
/// Everything random is drawn from `seed` (trial-level) and
/// `texture.profile_seed` (texture-level), so the output is a pure function of
/// its arguments.
#[allow(clippy::too_many_arguments)]
pub fn generate_trace(
    texture: &TextureParams,
    geometry: GridGeometry,
    velocity_mm_s: f64,
    slide_distance_mm: f64,
    sample_rate_hz: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<SensorTrace> {
    if !(velocity_mm_s > 0.0) || !(slide_distance_mm > 0.0) || !(sample_rate_hz > 0.0) {
        return Err(invalid("velocity, slide distance and sample rate must all be positive"));
    }
    if !(noise_sd >= 0.0) {
        return Err(invalid("noise_sd must be >= 0"));
    }
    geometry.validate()?;
    let duration = slide_distance_mm / velocity_mm_s;
    let num_samples = ((duration * sample_rate_hz).round() as usize).max(1);
    let mut rng = seed::rng(seed);
    let x0 = if texture.start_jitter_mm > 0.0 {
        rng.random::<f64>() * texture.start_jitter_mm
    } else {
        0.0
    };
    let amplitude = if texture.amplitude_jitter > 0.0 {
        let n = Normal::new(1.0, texture.amplitude_jitter).map_err(|e| invalid(e.to_string()))?;
        texture.amplitude * n.sample(&mut rng).max(0.0)
    } else {
        texture.amplitude
    };
    let speed = if texture.speed_jitter > 0.0 {
        let n = Normal::new(1.0, texture.speed_jitter).map_err(|e| invalid(e.to_string()))?;
        velocity_mm_s * n.sample(&mut rng).max(0.1)
    } else {
        velocity_mm_s
    };
    let noise = if noise_sd > 0.0 {
        Some(Normal::new(0.0, noise_sd).map_err(|e| invalid(e.to_string()))?)
    } else {
        None
    };
    // The profile's random draws come from its own seed, so its length does
    // not change the texture it realizes.
    let travelled = speed * num_samples as f64 / sample_rate_hz;
    let span = travelled + (geometry.cols - 1) as f64 * geometry.pitch_mm + texture.start_jitter_mm;
    let profile = TextureProfile::new(texture, span)?;

    // Rows in one column read the same stretch of texture; only the
    // measurement noise differs.
    let columns: Vec<Vec<f64>> = (0..geometry.cols)
        .map(|col| {
            let offset = x0 + col as f64 * geometry.pitch_mm;
            (0..num_samples)
                .map(|n| {
                    let x = speed * n as f64 / sample_rate_hz + offset;
                    texture.baseline + amplitude * profile.shape(x)
                })
                .collect()
        })
        .collect();
    let mut channels = Vec::with_capacity(geometry.num_taxels());
    for _row in 0..geometry.rows {
        for column in &columns {
            let ch: Vec<f64> = column
                .iter()
                .map(|&y| {
                    let y = match &noise {
                        Some(dist) => y + dist.sample(&mut rng),
                        None => y,
                    };
                    y.clamp(0.0, 1.0)
                })
                .collect();
            channels.push(ch);
        }
    }
    Ok(SensorTrace {
        geometry,
        sample_rate_hz,
        channels,
        label: String::new(),
        velocity_mm_s,
        trial_id: 0,
        phase_markers: None,
        synthetic: true,
    })
}

/// First-order IIR low-pass, `y[n] = y[n-1] + α (x[n] - y[n-1])` with
/// `α = 1 - exp(-2π f_c / f_s)` and `y[0] = x[0]`.
#[derive(Debug, Clone, Copy)]
pub struct LowPass {
    alpha: f64,
}

impl LowPass {
    pub fn new(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0) || !(cutoff_hz < sample_rate_hz / 2.0) {
            return Err(invalid(format!(
                "cutoff must lie in (0, {}) Hz, got {cutoff_hz}",
                sample_rate_hz / 2.0
            )));
        }
        Ok(LowPass {
            alpha: 1.0 - (-2.0 * PI * cutoff_hz / sample_rate_hz).exp(),
        })
    }

    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(input.len());
        let Some(&first) = input.first() else {
            return out;
        };
        let mut y = first;
        for &x in input {
            y += self.alpha * (x - y);
            out.push(y);
        }
        out
    }
}

pub const DEFAULT_CUTOFF_HZ: f64 = 50.0;

/// Low-pass filters each channel, then divides every sample by the single
/// largest filtered value across all channels.
pub fn preprocess(trace: &SensorTrace, cutoff_hz: f64) -> Result<SensorTrace> {
    let filter = LowPass::new(cutoff_hz, trace.sample_rate_hz)?;
    let filtered: Vec<Vec<f64>> = trace.channels.iter().map(|c| filter.apply(c)).collect();
    let global_max = filtered.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(global_max > 0.0) {
        return Err(Error::Degenerate(format!(
            "global maximum {global_max} is not positive; cannot normalize"
        )));
    }
    let mut out = trace.clone();
    out.channels = filtered
        .into_iter()
        .map(|c| c.into_iter().map(|v| v / global_max).collect())
        .collect();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Trace CSV

fn parse_header_fields(line: &str, line_no: u64) -> Result<Vec<(String, String)>> {
    line.trim_start_matches('#')
        .split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    message: format!("malformed header token `{tok}` (expected key=value)"),
                })
        })
        .collect()
}

fn header_value<T: std::str::FromStr>(fields: &[(String, String)], key: &str, line: u64) -> Result<Option<T>> {
    match fields.iter().find(|(k, _)| k == key) {
        None => Ok(None),
        Some((_, v)) => v.parse().map(Some).map_err(|_| Error::Parse {
            line,
            message: format!("header field `{key}` has invalid value `{v}`"),
        }),
    }
}

fn required<T>(v: Option<T>, key: &str, line: u64) -> Result<T> {
    v.ok_or_else(|| Error::Parse {
        line,
        message: format!("header is missing `{key}`"),
    })
}

/// Parses a trace CSV from any reader.
pub fn read_trace<R: Read>(reader: R) -> Result<SensorTrace> {
    let mut lines = BufReader::new(reader);
    let mut meta: Vec<(String, String)> = Vec::new();
    let mut line_no = 0u64;
    let mut buf = String::new();
    let column_header = loop {
        buf.clear();
        if lines.read_line(&mut buf)? == 0 {
            return Err(Error::Parse {
                line: line_no,
                message: "missing column header row".into(),
            });
        }
        line_no += 1;
        let l = buf.trim_end();
        if l.starts_with('#') {
            meta.extend(parse_header_fields(l, line_no)?);
        } else if !l.is_empty() {
            break l.to_string();
        }
    };
    let meta_line = 1;
    let rows: usize = required(header_value(&meta, "rows", meta_line)?, "rows", meta_line)?;
    let cols: usize = required(header_value(&meta, "cols", meta_line)?, "cols", meta_line)?;
    let pitch: f64 = required(header_value(&meta, "pitch_mm", meta_line)?, "pitch_mm", meta_line)?;
    let rate: f64 = required(header_value(&meta, "rate_hz", meta_line)?, "rate_hz", meta_line)?;
    let label: String = required(header_value(&meta, "label", meta_line)?, "label", meta_line)?;
    let velocity: f64 = required(
        header_value(&meta, "velocity_mm_s", meta_line)?,
        "velocity_mm_s",
        meta_line,
    )?;
    let trial: u32 = required(header_value(&meta, "trial", meta_line)?, "trial", meta_line)?;
    let area: f64 = header_value(&meta, "taxel_area_mm2", meta_line)?.unwrap_or(4.0);
    let synthetic: bool = header_value(&meta, "synthetic", meta_line)?.unwrap_or(false);
    let phase_markers = match header_value::<String>(&meta, "phases", meta_line)? {
        None => None,
        Some(s) => {
            let v: Vec<usize> = s
                .split(',')
                .map(|p| p.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    line: meta_line,
                    message: format!("invalid phases `{s}`"),
                })?;
            if v.len() != 4 {
                return Err(Error::Parse {
                    line: meta_line,
                    message: "phases needs four sample indices".into(),
                });
            }
            Some(PhaseMarkers {
                contact: v[0],
                hold: v[1],
                slide: v[2],
                retract: v[3],
            })
        }
    };
    let geometry = GridGeometry::new(rows, cols, pitch, area).map_err(|e| Error::Parse {
        line: meta_line,
        message: e.to_string(),
    })?;

    // Map header columns onto row-major taxel slots.
    let header_line = line_no;
    let names: Vec<&str> = column_header.split(',').map(str::trim).collect();
    let expected = geometry.num_taxels();
    if names.len() != expected + 1 {
        return Err(Error::ChannelCountMismatch {
            line: header_line,
            expected,
            found: names.len().saturating_sub(1),
        });
    }
    let mut slot_of_column = Vec::with_capacity(expected);
    for name in &names[1..] {
        let slot = (0..expected)
            .find(|&i| {
                let (r, c) = geometry.position(i);
                geometry.taxel_name(r, c) == *name
            })
            .ok_or_else(|| Error::Parse {
                line: header_line,
                message: format!("unknown taxel column `{name}`"),
            })?;
        if slot_of_column.contains(&slot) {
            return Err(Error::Parse {
                line: header_line,
                message: format!("duplicate taxel column `{name}`"),
            });
        }
        slot_of_column.push(slot);
    }

    let mut rest = String::new();
    lines.read_to_string(&mut rest)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(rest.as_bytes());
    let mut channels = vec![Vec::new(); expected];
    for record in rdr.records() {
        let record = record?;
        let line = header_line + record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != expected + 1 {
            return Err(Error::Parse {
                line,
                message: format!("ragged row: {} cells, expected {}", record.len(), expected + 1),
            });
        }
        for (col, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric cell `{cell}` in column {col}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite cell `{cell}` in column {col}"),
                });
            }
            channels[slot_of_column[col - 1]].push(v);
        }
    }
    if channels[0].is_empty() {
        return Err(Error::Parse {
            line: header_line,
            message: "no samples".into(),
        });
    }
    let mut trace = SensorTrace::new(geometry, rate, channels, label, velocity, trial)?;
    trace.phase_markers = phase_markers;
    trace.synthetic = synthetic;
    Ok(trace)
}

pub fn load_trace(path: &Path) -> Result<SensorTrace> {
    let file = std::fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_trace(file).map_err(|e| e.in_file(path))
}

/// Decimal places written for sample values.
pub const TRACE_PRECISION: usize = 6;

pub fn write_trace<W: Write>(trace: &SensorTrace, mut out: W) -> Result<()> {
    if trace.label.is_empty() || trace.label.chars().any(char::is_whitespace) {
        return Err(invalid(format!(
            "label `{}` must be non-empty and contain no whitespace",
            trace.label
        )));
    }
    let g = &trace.geometry;
    let mut head = format!(
        "# rows={} cols={} pitch_mm={} rate_hz={} label={} velocity_mm_s={} trial={}",
        g.rows, g.cols, g.pitch_mm, trace.sample_rate_hz, trace.label, trace.velocity_mm_s, trace.trial_id
    );
    let _ = write!(head, " taxel_area_mm2={}", g.taxel_area_mm2);
    if trace.synthetic {
        head.push_str(" synthetic=true");
    }
    if let Some(m) = trace.phase_markers {
        let _ = write!(head, " phases={},{},{},{}", m.contact, m.hold, m.slide, m.retract);
    }
    writeln!(out, "{head}")?;
    let mut cols = vec!["t_ms".to_string()];
    for r in 0..g.rows {
        for c in 0..g.cols {
            cols.push(g.taxel_name(r, c));
        }
    }
    writeln!(out, "{}", cols.join(","))?;
    let mut line = String::new();
    for n in 0..trace.num_samples() {
        line.clear();
        let _ = write!(line, "{:.3}", 1000.0 * n as f64 / trace.sample_rate_hz);
        for ch in &trace.channels {
            let _ = write!(line, ",{:.*}", TRACE_PRECISION, ch[n]);
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save_trace(trace: &SensorTrace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    let mut w = std::io::BufWriter::new(file);
    write_trace(trace, &mut w)?;
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Synthetic corpus description

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTexture {
    pub label: String,
    #[serde(flatten)]
    pub params: TextureParams,
}

fn default_slide() -> f64 {
    90.0
}
fn default_rate() -> f64 {
    1000.0
}
fn default_trials() -> u32 {
    20
}
fn default_velocities() -> Vec<f64> {
    vec![5.0, 10.0, 15.0]
}

/// Generator configuration: which textures, velocities and trial counts to
/// synthesize.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpusSpec {
    #[serde(default)]
    pub version: u32,
    #[serde(default)]
    pub geometry: GridGeometry,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    #[serde(default = "default_slide")]
    pub slide_distance_mm: f64,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default = "default_velocities")]
    pub velocities: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub seed: u64,
    pub textures: Vec<LabeledTexture>,
}

impl SyntheticCorpusSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SyntheticCorpusSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.textures.is_empty() {
            return Err(invalid("corpus lists no textures"));
        }
        if self.velocities.is_empty() || self.velocities.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid("corpus velocities must be non-empty and positive"));
        }
        if self.trials == 0 {
            return Err(invalid("corpus needs at least one trial"));
        }
        for t in &self.textures {
            t.params
                .validate()
                .map_err(|e| invalid(format!("texture `{}`: {e}", t.label)))?;
        }
        self.geometry.validate()
    }

    pub fn labels(&self) -> Vec<String> {
        self.textures.iter().map(|t| t.label.clone()).collect()
    }

    /// Seed of one (texture, velocity, trial) cell.
    pub fn trace_seed(&self, texture: usize, velocity: usize, trial: u32) -> u64 {
        let cell = ((texture as u64) << 40) | ((velocity as u64) << 24) | trial as u64;
        seed::derive(self.seed, seed::STREAM_TRACE, cell)
    }

    pub fn generate(&self, texture: usize, velocity: usize, trial: u32) -> Result<SensorTrace> {
        let t = &self.textures[texture];
        let v = self.velocities[velocity];
        let mut trace = generate_trace(
            &t.params,
            self.geometry,
            v,
            self.slide_distance_mm,
            self.sample_rate_hz,
            self.noise_sd,
            self.trace_seed(texture, velocity, trial),
        )?;
        trace.label = t.label.clone();
        trace.trial_id = trial;
        Ok(trace)
    }
}
