//! Izhikevich regular-spiking encoder and spike-train containers.
//!
//! Each preprocessed channel is scaled by a gain and injected as input
//! current into
//!
//! ```text
//! v' = 0.04 v² + 5 v + 140 - u + I
//! u' = a (b v - u)
//! if v >= v_peak: v <- c, u <- u + d
//! ```
//!
//! integrated at the sampling rate (time in ms). `v` is advanced in two
//! half-steps per sample and `u` once.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::{GridGeometry, SensorTrace};

fn d_a() -> f64 {
    0.02
}
fn d_b() -> f64 {
    0.2
}
fn d_c() -> f64 {
    -65.0
}
fn d_d() -> f64 {
    8.0
}
fn d_peak() -> f64 {
    30.0
}
fn d_gain() -> f64 {
    8.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    #[serde(default = "d_a")]
    pub a: f64,
    #[serde(default = "d_b")]
    pub b: f64,
    /// Reset potential (mV).
    #[serde(default = "d_c")]
    pub c: f64,
    #[serde(default = "d_d")]
    pub d: f64,
    /// Spike threshold (mV).
    #[serde(default = "d_peak")]
    pub v_peak: f64,
    /// Input current per unit of normalized sensor output.
    #[serde(default = "d_gain")]
    pub gain: f64,
}

impl Default for NeuronParams {
    /// Regular spiking with spike-frequency adaptation, gain 8.
    fn default() -> Self {
        NeuronParams {
            a: d_a(),
            b: d_b(),
            c: d_c(),
            d: d_d(),
            v_peak: d_peak(),
            gain: d_gain(),
        }
    }
}

impl NeuronParams {
    pub fn with_gain(self, gain: f64) -> Self {
        NeuronParams { gain, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.b, self.c, self.d, self.v_peak, self.gain];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid("neuron parameters must be finite"));
        }
        if !(self.a > 0.0) {
            return Err(invalid("neuron parameter a must be > 0"));
        }
        if !(self.v_peak > self.c) {
            return Err(invalid("v_peak must exceed the reset potential c"));
        }
        if !(self.gain > 0.0) {
            return Err(invalid("gain must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    /// Membrane potential (mV).
    pub v: f64,
    /// Recovery variable.
    pub u: f64,
}

impl NeuronState {
    pub fn resting(p: &NeuronParams) -> Self {
        NeuronState { v: p.c, u: p.b * p.c }
    }

    /// Advances one sample of `dt_ms` with input current `current`.
    /// Returns true when the step produced a spike (state already reset).
    ///
    /// `v` is clipped at the peak so an overshoot cannot leak into `u`;
    /// otherwise the size of the overshoot jitters the adaptation.
    #[inline]
    pub fn step(&mut self, p: &NeuronParams, current: f64, dt_ms: f64) -> bool {
        let half = 0.5 * dt_ms;
        for _ in 0..2 {
            self.v += half * (0.04 * self.v * self.v + 5.0 * self.v + 140.0 - self.u + current);
            if self.v >= p.v_peak {
                self.v = p.v_peak;
                break;
            }
        }
        self.u += dt_ms * p.a * (p.b * self.v - self.u);
        if self.v >= p.v_peak {
            self.v = p.c;
            self.u += p.d;
            true
        } else {
            false
        }
    }
}

/// Ordered spike times of one taxel over `[0, duration_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeTrain {
    spike_times_s: Vec<f64>,
    duration_s: f64,
}

impl SpikeTrain {
    pub fn new(spike_times_s: Vec<f64>, duration_s: f64) -> Result<Self> {
        if !(duration_s >= 0.0) || !duration_s.is_finite() {
            return Err(invalid(format!("invalid spike train duration {duration_s}")));
        }
        for (i, &t) in spike_times_s.iter().enumerate() {
            if !(t >= 0.0 && t < duration_s) {
                return Err(invalid(format!("spike time {t} outside [0, {duration_s})")));
            }
            if i > 0 && !(t > spike_times_s[i - 1]) {
                return Err(invalid("spike times must be strictly increasing"));
            }
        }
        Ok(SpikeTrain {
            spike_times_s,
            duration_s,
        })
    }

    pub fn empty(duration_s: f64) -> Self {
        SpikeTrain {
            spike_times_s: Vec::new(),
            duration_s,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.spike_times_s
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }

    pub fn len(&self) -> usize {
        self.spike_times_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_times_s.is_empty()
    }

    pub fn isis(&self) -> Vec<f64> {
        self.spike_times_s.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Spike counts in `num_bins` consecutive bins of `width_s` starting at
    /// 0; spikes past the last bin are dropped. A spike on a bin edge belongs
    /// to the later bin, with a small tolerance for sample-aligned times
    /// that round just below the edge.
    pub fn binned_counts(&self, width_s: f64, num_bins: usize) -> Vec<usize> {
        let mut counts = vec![0usize; num_bins];
        for &t in &self.spike_times_s {
            let b = (t / width_s + 1e-9).floor() as usize;
            if b < num_bins {
                counts[b] += 1;
            }
        }
        counts
    }

    /// Spikes with `start <= t < end`.
    pub fn count_in(&self, start: f64, end: f64) -> usize {
        let lo = self.spike_times_s.partition_point(|&t| t < start);
        let hi = self.spike_times_s.partition_point(|&t| t < end);
        hi.saturating_sub(lo)
    }
}

/// One spike train per taxel, row-major, plus trial metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeArray {
    pub trains: Vec<SpikeTrain>,
    pub geometry: GridGeometry,
    pub label: String,
    pub velocity_mm_s: f64,
    pub trial_id: u32,
    pub synthetic: bool,
}

impl SpikeArray {
    pub fn validate(&self) -> Result<()> {
        if self.trains.len() != self.geometry.num_taxels() {
            return Err(invalid(format!(
                "spike array holds {} trains for a {}x{} grid",
                self.trains.len(),
                self.geometry.rows,
                self.geometry.cols
            )));
        }
        let d = self.duration_s();
        if self.trains.iter().any(|t| t.duration_s != d) {
            return Err(invalid("spike trains in an array must share one duration"));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.trains.first().map_or(0.0, |t| t.duration_s)
    }

    pub fn total_spikes(&self) -> usize {
        self.trains.iter().map(SpikeTrain::len).sum()
    }

    pub fn train_at(&self, row: usize, col: usize) -> &SpikeTrain {
        &self.trains[self.geometry.index(row, col)]
    }
}

/// Encodes one analog channel into a spike train.
pub fn encode(channel: &[f64], sample_rate_hz: f64, params: &NeuronParams) -> Result<SpikeTrain> {
    params.validate()?;
    if channel.is_empty() {
        return Err(invalid("cannot encode an empty channel"));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(invalid("sample rate must be > 0"));
    }
    let dt_ms = 1000.0 / sample_rate_hz;
    let mut state = NeuronState::resting(params);
    let mut spikes = Vec::new();
    for (n, &x) in channel.iter().enumerate() {
        let t = n as f64 / sample_rate_hz;
        if !x.is_finite() {
            return Err(invalid(format!("non-finite input sample at t = {t} s")));
        }
        if state.step(params, params.gain * x, dt_ms) {
            spikes.push(t);
        }
        if !state.v.is_finite() || !state.u.is_finite() {
            return Err(Error::NonFinite { time_s: t });
        }
    }
    Ok(SpikeTrain {
        spike_times_s: spikes,
        duration_s: channel.len() as f64 / sample_rate_hz,
    })
}

/// Encodes every channel of a trace independently.
pub fn encode_array(trace: &SensorTrace, params: &NeuronParams) -> Result<SpikeArray> {
    let trains = trace
        .channels
        .iter()
        .map(|c| encode(c, trace.sample_rate_hz, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpikeArray {
        trains,
        geometry: trace.geometry,
        label: trace.label.clone(),
        velocity_mm_s: trace.velocity_mm_s,
        trial_id: trace.trial_id,
        synthetic: trace.synthetic,
    })
}

// ---------------------------------------------------------------------------
// ISI histograms

/// Pooled ISI histogram for one (gain, label) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsiHistogram {
    pub gain: f64,
    pub label: String,
    pub bin_width_s: f64,
    /// `counts[i]` covers `[i·w, (i+1)·w)`.
    pub counts: Vec<u64>,
    pub normalized: Vec<f64>,
    pub num_isis: u64,
    pub mean_isi_s: Option<f64>,
    /// No trace in this cell produced two spikes on any taxel.
    pub sparse: bool,
}

fn isi_bin(isi: f64, width: f64) -> usize {
    // ISIs are differences of sample-aligned times; absorb rounding below
    // an exact bin edge.
    (isi / width + 1e-9).floor() as usize
}

/// Bins `isis` into `num_bins` bins of `width` (values past the end land in
/// the last bin).
pub fn isi_histogram(isis: &[f64], width: f64, num_bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; num_bins];
    if num_bins == 0 {
        return counts;
    }
    for &isi in isis {
        let b = isi_bin(isi, width).min(num_bins - 1);
        counts[b] += 1;
    }
    counts
}

/// Re-encodes preprocessed traces at each gain and pools ISIs per label.
///
/// Output is ordered gain-major, then by first appearance of each label.
/// All histograms share one bin range so they can be overlaid.
pub fn isi_histogram_sweep(
    traces: &[SensorTrace],
    gains: &[f64],
    params: &NeuronParams,
    bin_width_s: f64,
) -> Result<Vec<IsiHistogram>> {
    if gains.is_empty() || traces.is_empty() {
        return Err(invalid("gain sweep needs at least one gain and one trace"));
    }
    if !(bin_width_s > 0.0) {
        return Err(invalid("ISI bin width must be > 0"));
    }
    let mut labels: Vec<&str> = Vec::new();
    for t in traces {
        if !labels.contains(&t.label.as_str()) {
            labels.push(&t.label);
        }
    }
    let mut pooled: Vec<(f64, &str, Vec<f64>)> = Vec::new();
    for &gain in gains {
        let p = params.with_gain(gain);
        for &label in &labels {
            let mut isis = Vec::new();
            for t in traces.iter().filter(|t| t.label == label) {
                for train in encode_array(t, &p)?.trains {
                    isis.extend(train.isis());
                }
            }
            pooled.push((gain, label, isis));
        }
    }
    let num_bins = pooled
        .iter()
        .flat_map(|(_, _, isis)| isis.iter())
        .map(|&i| isi_bin(i, bin_width_s) + 1)
        .max()
        .unwrap_or(0);
    Ok(pooled
        .into_iter()
        .map(|(gain, label, isis)| {
            let counts = isi_histogram(&isis, bin_width_s, num_bins);
            let n = isis.len() as u64;
            let normalized = counts
                .iter()
                .map(|&c| if n > 0 { c as f64 / n as f64 } else { 0.0 })
                .collect();
            IsiHistogram {
                gain,
                label: label.to_string(),
                bin_width_s,
                counts,
                normalized,
                num_isis: n,
                mean_isi_s: (n > 0).then(|| isis.iter().sum::<f64>() / n as f64),
                sparse: n == 0,
            }
        })
        .collect())
}

/// `gain,label,bin_start_s,count,probability` rows.
pub fn write_isi_histograms<W: Write>(hists: &[IsiHistogram], mut out: W) -> Result<()> {
    writeln!(out, "gain,label,bin_start_s,count,probability")?;
    for h in hists {
        for (i, (c, p)) in h.counts.iter().zip(&h.normalized).enumerate() {
            writeln!(out, "{},{},{},{},{}", h.gain, h.label, i as f64 * h.bin_width_s, c, p)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Spike CSV

pub fn write_spikes<W: Write>(spikes: &SpikeArray, mut out: W) -> Result<()> {
    let g = &spikes.geometry;
    let mut head = format!(
        "# rows={} cols={} pitch_mm={} taxel_area_mm2={} label={} velocity_mm_s={} trial={} duration_s={}",
        g.rows,
        g.cols,
        g.pitch_mm,
        g.taxel_area_mm2,
        spikes.label,
        spikes.velocity_mm_s,
        spikes.trial_id,
        spikes.duration_s()
    );
    if spikes.synthetic {
        head.push_str(" synthetic=true");
    }
    writeln!(out, "{head}")?;
    writeln!(out, "taxel_id,spike_time_s")?;
    let mut line = String::new();
    for (i, train) in spikes.trains.iter().enumerate() {
        for t in train.times() {
            line.clear();
            let _ = write!(line, "{i},{t}");
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

pub fn read_spikes<R: Read>(reader: R) -> Result<SpikeArray> {
    let parse_err = |line: u64, message: String| Error::Parse { line, message };
    let mut rdr = BufReader::new(reader);
    let mut meta = String::new();
    rdr.read_line(&mut meta)?;
    if !meta.starts_with('#') {
        return Err(parse_err(1, "missing `#` metadata line".into()));
    }
    let fields: Vec<(&str, &str)> = meta[1..]
        .split_whitespace()
        .map(|t| {
            t.split_once('=')
                .ok_or_else(|| parse_err(1, format!("malformed token `{t}`")))
        })
        .collect::<Result<_>>()?;
    let get = |k: &str| -> Result<&str> {
        fields
            .iter()
            .find(|(key, _)| *key == k)
            .map(|(_, v)| *v)
            .ok_or_else(|| parse_err(1, format!("metadata is missing `{k}`")))
    };
    let num = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| parse_err(1, format!("metadata `{k}` is not numeric")))
    };
    let rows = num("rows")? as usize;
    let cols = num("cols")? as usize;
    let area = fields
        .iter()
        .find(|(k, _)| *k == "taxel_area_mm2")
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(4.0);
    let geometry = GridGeometry::new(rows, cols, num("pitch_mm")?, area)?;
    let duration = num("duration_s")?;
    let mut times = vec![Vec::new(); geometry.num_taxels()];
    let mut line_no = 1u64;
    let mut buf = String::new();
    let mut seen_header = false;
    loop {
        buf.clear();
        if rdr.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let l = buf.trim();
        if l.is_empty() {
            continue;
        }
        if !seen_header {
            if l != "taxel_id,spike_time_s" {
                return Err(parse_err(line_no, format!("unexpected header `{l}`")));
            }
            seen_header = true;
            continue;
        }
        let (id, t) = l
            .split_once(',')
            .ok_or_else(|| parse_err(line_no, "expected two columns".into()))?;
        let id: usize = id
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad taxel id `{id}`")))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad spike time `{t}`")))?;
        let slot = times
            .get_mut(id)
            .ok_or_else(|| parse_err(line_no, format!("taxel id {id} outside grid")))?;
        slot.push(t);
    }
    let trains = times
        .into_iter()
        .map(|mut t| {
            t.sort_by(f64::total_cmp);
            SpikeTrain::new(t, duration)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpikeArray {
        trains,
        geometry,
        label: get("label")?.to_string(),
        velocity_mm_s: num("velocity_mm_s")?,
        trial_id: num("trial")? as u32,
        synthetic: get("synthetic").map(|s| s == "true").unwrap_or(false),
    })
}

pub fn load_spikes(path: &Path) -> Result<SpikeArray> {
    let f = std::fs::File::open(path).map_err(|e| Error::from(e).in_file(path))?;
    read_spikes(f).map_err(|e| e.in_file(path))
}

pub fn save_spikes(spikes: &SpikeArray, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::from(e).in_file(path))?;
    let mut w = std::io::BufWriter::new(f);
    write_spikes(spikes, &mut w)?;
    w.flush()?;
    Ok(())
}
