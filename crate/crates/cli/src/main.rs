use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use neurotex::classify::{
    cross_validate, evaluate_split, read_feature_csv, split_by_velocity, ClassificationReport, ConfusionMatrix,
    Dataset, DEFAULT_FOLDS, DEFAULT_K,
};
use neurotex::glcm::{glcm_features, GlcmMode, FEATURE_NAMES as GLCM_FEATURES};
use neurotex::harness::{self, trace_files, DataSource, Experiment, ExperimentConfig, RunMetadata};
use neurotex::neuron::{encode_array, load_spikes, save_spikes, NeuronParams, SpikeArray};
use neurotex::signal::{load_trace, preprocess, save_trace, SyntheticCorpusSpec, DEFAULT_CUTOFF_HZ};
use neurotex::spikestats::{single_taxel_features, DEFAULT_FANO_WINDOW_S, FEATURE_NAMES as TAXEL_FEATURES};
use neurotex::volume::{build_volume, fit_quantizer, Quantizer, DEFAULT_BIN_S, DEFAULT_LEVELS};
use neurotex::{Error, Result};

mod plots;

#[derive(Parser)]
#[command(
    name = "neurotex",
    version,
    about = "Tactile texture classification from spiking taxel arrays"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus as trace CSVs.
    Generate {
        /// Experiment config or bare corpus description (JSON); the bundled
        /// default corpus when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Preprocess traces and encode them as spike CSVs.
    Encode {
        /// A trace CSV or a directory of them.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8.0)]
        gain: f64,
        #[arg(long, default_value_t = DEFAULT_CUTOFF_HZ)]
        cutoff_hz: f64,
    },
    /// Compute one feature row per spike CSV.
    Features {
        /// A spike CSV or a directory of them.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Output feature CSV.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BIN_S)]
        bin_s: f64,
        #[arg(long, default_value_t = DEFAULT_LEVELS)]
        levels: usize,
        /// Frozen quantizer JSON; fitted on the inputs (and written next to
        /// the output) when omitted.
        #[arg(long)]
        quantizer: Option<PathBuf>,
        /// Taxel as `row,col` for the taxel mode.
        #[arg(long, default_value = "1,1")]
        taxel: String,
        #[arg(long, default_value_t = DEFAULT_FANO_WINDOW_S)]
        fano_window_s: f64,
    },
    /// K-nearest-neighbour evaluation of a feature CSV.
    Classify {
        #[arg(long)]
        features: PathBuf,
        /// Output directory for results.json and confusion.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = DEFAULT_FOLDS)]
        folds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use raw (unstandardized) features.
        #[arg(long)]
        raw: bool,
        /// Train on every other velocity and test on this one instead of
        /// cross-validating.
        #[arg(long)]
        test_velocity: Option<f64>,
    },
    /// Run a study: accuracy, perturbation, temporal, tor, velocity,
    /// gain_sweep or all.
    Experiment {
        name: String,
        /// Experiment config; the bundled synthetic default when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed (overrides the config's).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Render SVG charts from the result CSVs.
        #[arg(long)]
        emit_plots: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Taxel,
    Glcm2d,
    Glcm3d,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Taxel => "taxel",
            Mode::Glcm2d => "glcm2d",
            Mode::Glcm3d => "glcm3d",
        }
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: ErrorBody<'a>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = ErrorJson {
                error: ErrorBody {
                    kind: e.kind(),
                    message: e.to_string(),
                },
            };
            eprintln!("{}", serde_json::to_string(&body).expect("error JSON"));
            ExitCode::FAILURE
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { config, out } => generate(config.as_deref(), &out),
        Command::Encode {
            input,
            out,
            gain,
            cutoff_hz,
        } => encode(&input, &out, gain, cutoff_hz),
        Command::Features {
            input,
            mode,
            out,
            bin_s,
            levels,
            quantizer,
            taxel,
            fano_window_s,
        } => features(&FeatureArgs {
            input,
            mode,
            out,
            bin_s,
            levels,
            quantizer,
            taxel,
            fano_window_s,
        }),
        Command::Classify {
            features,
            out,
            k,
            folds,
            seed,
            raw,
            test_velocity,
        } => classify(&features, &out, k, folds, seed, !raw, test_velocity),
        Command::Experiment {
            name,
            config,
            seed,
            out,
            emit_plots,
        } => experiment(&name, config.as_deref(), seed, &out, emit_plots),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| file_error(path, e.into()))
}

fn file_error(path: &Path, e: Error) -> Error {
    Error::File {
        path: path.display().to_string(),
        source: Box::new(e),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| file_error(dir, e.into()))
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        None => Ok(harness::default_config()),
        Some(p) => ExperimentConfig::from_json(&read_text(p)?).map_err(|e| file_error(p, e)),
    }
}

fn generate(config: Option<&Path>, out: &Path) -> Result<()> {
    let spec = match config {
        None => match harness::default_config().data {
            DataSource::Synthetic(s) => s,
            DataSource::TraceDir(_) => unreachable!("bundled config is synthetic"),
        },
        Some(p) => {
            let text = read_text(p)?;
            match ExperimentConfig::from_json(&text) {
                Ok(cfg) => match cfg.data {
                    DataSource::Synthetic(s) => s,
                    DataSource::TraceDir(d) => {
                        return Err(neurotex::Error::InvalidParameter(format!(
                            "config reads traces from {}; nothing to generate",
                            d.display()
                        )))
                    }
                },
                Err(_) => SyntheticCorpusSpec::from_json(&text).map_err(|e| file_error(p, e))?,
            }
        }
    };
    create_dir(out)?;
    let mut n = 0;
    for (t, tex) in spec.textures.iter().enumerate() {
        for (vi, v) in spec.velocities.iter().enumerate() {
            for trial in 0..spec.trials {
                let trace = spec.generate(t, vi, trial)?;
                let name = format!("{}_v{}_t{:03}.csv", tex.label, v, trial);
                save_trace(&trace, &out.join(name))?;
                n += 1;
            }
        }
    }
    println!("wrote {n} synthetic traces to {}", out.display());
    Ok(())
}

/// `path` itself, or the sorted `*.csv` files inside it.
fn inputs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        trace_files(path)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn encode(input: &Path, out: &Path, gain: f64, cutoff_hz: f64) -> Result<()> {
    let params = NeuronParams::default().with_gain(gain);
    params.validate()?;
    create_dir(out)?;
    let files = inputs(input)?;
    for f in &files {
        let trace = load_trace(f)?;
        let trace = trace.sliding_phase().map_err(|e| file_error(f, e))?;
        let trace = preprocess(&trace, cutoff_hz).map_err(|e| file_error(f, e))?;
        let spikes = encode_array(&trace, &params).map_err(|e| file_error(f, e))?;
        save_spikes(&spikes, &out.join(f.file_name().expect("file name")))?;
    }
    println!("encoded {} traces into {}", files.len(), out.display());
    Ok(())
}

struct FeatureArgs {
    input: PathBuf,
    mode: Mode,
    out: PathBuf,
    bin_s: f64,
    levels: usize,
    quantizer: Option<PathBuf>,
    taxel: String,
    fano_window_s: f64,
}

fn parse_taxel(s: &str) -> Result<(usize, usize)> {
    let bad = || neurotex::Error::InvalidParameter(format!("taxel must be `row,col`, got {s:?}"));
    let (r, c) = s.split_once(',').ok_or_else(bad)?;
    Ok((
        r.trim().parse().map_err(|_| bad())?,
        c.trim().parse().map_err(|_| bad())?,
    ))
}

fn features(a: &FeatureArgs) -> Result<()> {
    let files = inputs(&a.input)?;
    let spikes: Vec<SpikeArray> = files.iter().map(|f| load_spikes(f)).collect::<Result<_>>()?;
    let file = fs::File::create(&a.out).map_err(|e| file_error(&a.out, e.into()))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    match a.mode {
        Mode::Taxel => {
            let (row, col) = parse_taxel(&a.taxel)?;
            let mut header = vec!["label", "velocity", "trial", "taxel", "defined_flags"];
            header.extend(TAXEL_FEATURES);
            w.write_record(&header)?;
            for s in &spikes {
                let f = single_taxel_features(s, row, col, a.fano_window_s)?;
                let mut rec = meta(s);
                rec.push(s.geometry.taxel_name(row, col));
                rec.push(f.defined_flags());
                rec.extend(f.vector().iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        Mode::Glcm2d | Mode::Glcm3d => {
            let mode = match a.mode {
                Mode::Glcm2d => GlcmMode::Glcm2d,
                _ => GlcmMode::Glcm3d,
            };
            let volumes: Vec<_> = spikes.iter().map(|s| build_volume(s, a.bin_s)).collect::<Result<_>>()?;
            let q = match &a.quantizer {
                Some(p) => {
                    let q: Quantizer = serde_json::from_str(&read_text(p)?).map_err(|e| file_error(p, e.into()))?;
                    Quantizer::new(q.lo, q.hi, q.num_levels)?
                }
                None => {
                    let prepared: Vec<_> = volumes.iter().map(|v| mode.prepare(v)).collect();
                    let q = fit_quantizer(&prepared, a.levels)?;
                    let qpath = a.out.with_extension("quantizer.json");
                    fs::write(&qpath, serde_json::to_string_pretty(&q)? + "\n")
                        .map_err(|e| file_error(&qpath, e.into()))?;
                    q
                }
            };
            let offsets = neurotex::glcm::default_offsets();
            let mut header = vec!["label", "velocity", "trial", "mode"];
            header.extend(GLCM_FEATURES);
            w.write_record(&header)?;
            for (s, v) in spikes.iter().zip(&volumes) {
                let f = glcm_features(v, mode, &q, &offsets)?;
                let mut rec = meta(s);
                rec.push(mode.as_str().to_string());
                rec.extend(f.vector().iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
    }
    w.flush()?;
    println!(
        "wrote {} {} feature rows to {}",
        spikes.len(),
        a.mode.name(),
        a.out.display()
    );
    Ok(())
}

fn meta(s: &SpikeArray) -> Vec<String> {
    vec![s.label.clone(), s.velocity_mm_s.to_string(), s.trial_id.to_string()]
}

#[derive(Serialize, Deserialize)]
struct ClassifyOutput {
    #[serde(flatten)]
    report: ClassificationReport,
    source: String,
}

#[allow(clippy::too_many_arguments)]
fn classify(
    path: &Path,
    out: &Path,
    k: usize,
    folds: usize,
    seed: u64,
    standardize: bool,
    test_velocity: Option<f64>,
) -> Result<()> {
    let file = fs::File::open(path).map_err(|e| file_error(path, e.into()))?;
    let data = read_feature_csv(file).map_err(|e| file_error(path, e))?;
    let (report, confusion) = match test_velocity {
        None => {
            let r = cross_validate(&data, k, folds, seed, standardize)?;
            (ClassificationReport::from_cv("features", "pooled", &r), r.confusion)
        }
        Some(v) => {
            let (train, test) = split_by_velocity(&data, v)?;
            let cm = fixed_split(&train, &test, k, standardize)?;
            let report = ClassificationReport {
                approach: "features".into(),
                velocity_policy: format!("held_out:{v}"),
                k,
                folds: 0,
                seed,
                accuracy: cm.accuracy(),
                per_fold: Vec::new(),
                labels: cm.labels.clone(),
                confusion: cm.counts.clone(),
                standardized: standardize,
            };
            (report, cm)
        }
    };
    create_dir(out)?;
    let json = serde_json::to_string_pretty(&ClassifyOutput {
        report,
        source: path.display().to_string(),
    })? + "\n";
    let rpath = out.join("results.json");
    fs::write(&rpath, &json).map_err(|e| file_error(&rpath, e.into()))?;
    let cpath = out.join("confusion.csv");
    let mut cw = BufWriter::new(fs::File::create(&cpath).map_err(|e| file_error(&cpath, e.into()))?);
    confusion.write_csv(&mut cw)?;
    cw.flush()?;
    println!("accuracy {:.4} ({} rows)", confusion.accuracy(), confusion.total());
    Ok(())
}

fn fixed_split(train: &Dataset, test: &Dataset, k: usize, standardize: bool) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(train.labels.clone());
    evaluate_split(
        &train.features(),
        &train.label_indices(),
        &test.features(),
        &test.label_indices(),
        k,
        standardize,
        &mut cm,
    )?;
    Ok(cm)
}

fn experiment(name: &str, config: Option<&Path>, seed: Option<u64>, out: &Path, emit_plots: bool) -> Result<()> {
    let which = Experiment::parse(name)?;
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let started = SystemTime::now();
    let t0 = Instant::now();
    let report = harness::run(which, &cfg)?;
    let mut written = harness::write_report(&report, out)?;
    written.push(harness::write_metadata(
        &RunMetadata::new(which.as_str(), started, t0.elapsed()),
        out,
    )?);
    if emit_plots {
        written.extend(plots::render_all(out)?);
    }
    for p in &written {
        println!("{}", p.display());
    }
    Ok(())
}
