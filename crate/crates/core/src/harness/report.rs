use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiments::ExperimentReport;
use crate::classify::ConfusionMatrix;
use crate::error::{Error, Result};
use crate::neuron::write_isi_histograms;

/// Wall-clock facts about a run, kept out of the deterministic payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub experiment: String,
    pub started_unix_s: u64,
    pub elapsed_s: f64,
    pub threads: usize,
    pub crate_version: String,
}

impl RunMetadata {
    pub fn new(experiment: &str, started: std::time::SystemTime, elapsed: std::time::Duration) -> Self {
        RunMetadata {
            experiment: experiment.to_string(),
            started_unix_s: started.duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            elapsed_s: elapsed.as_secs_f64(),
            threads: rayon::current_num_threads(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// The report as pretty JSON with a trailing newline.
pub fn report_json(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| Error::from(e).in_file(&path))?;
    Ok((path, BufWriter::new(f)))
}

fn table(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<PathBuf> {
    let (path, out) = create(dir, name)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(path)
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

fn confusion(dir: &Path, name: &str, labels: &[String], counts: &[Vec<u64>]) -> Result<PathBuf> {
    let (path, mut out) = create(dir, name)?;
    ConfusionMatrix {
        labels: labels.to_vec(),
        counts: counts.to_vec(),
    }
    .write_csv(&mut out)?;
    out.flush()?;
    Ok(path)
}

/// Writes `report.json` plus one CSV per table into `dir` (created if
/// missing). Returns the written paths.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::from(e).in_file(dir))?;
    let mut written = Vec::new();
    let (path, mut out) = create(dir, "report.json")?;
    out.write_all(report_json(report)?.as_bytes())?;
    out.flush()?;
    written.push(path);

    let labels = &report.labels;
    if let Some(rows) = &report.accuracy {
        written.push(table(
            dir,
            "accuracy.csv",
            &["velocity_mm_s", "taxel_accuracy", "glcm3d_accuracy", "change_pct"],
            rows.iter()
                .map(|r| {
                    vec![
                        r.velocity_mm_s.to_string(),
                        r.taxel.accuracy.to_string(),
                        r.glcm3d.accuracy.to_string(),
                        opt(r.change_pct),
                    ]
                })
                .collect(),
        )?);
        written.push(table(
            dir,
            "accuracy_k_sweep.csv",
            &["velocity_mm_s", "k", "taxel_accuracy", "glcm3d_accuracy"],
            rows.iter()
                .flat_map(|r| {
                    r.k_sweep.iter().map(move |p| {
                        vec![
                            r.velocity_mm_s.to_string(),
                            p.k.to_string(),
                            p.taxel.to_string(),
                            p.glcm3d.to_string(),
                        ]
                    })
                })
                .collect(),
        )?);
        for r in rows {
            for s in [&r.taxel, &r.glcm3d] {
                let name = format!("confusion_{}_v{}.csv", s.approach.as_str(), r.velocity_mm_s);
                written.push(confusion(dir, &name, labels, &s.confusion)?);
            }
        }
    }
    if let Some(rows) = &report.perturbation {
        written.push(table(
            dir,
            "perturbation.csv",
            &["velocity_mm_s", "n", "mean_accuracy", "sd_accuracy", "taxel_reference"],
            rows.iter()
                .flat_map(|r| {
                    r.points.iter().map(move |p| {
                        vec![
                            r.velocity_mm_s.to_string(),
                            p.n.to_string(),
                            p.mean.to_string(),
                            p.sd.to_string(),
                            r.taxel_reference.to_string(),
                        ]
                    })
                })
                .collect(),
        )?);
    }
    if let Some(rows) = &report.temporal {
        written.push(table(
            dir,
            "temporal.csv",
            &["velocity_mm_s", "taxel_accuracy", "glcm2d_accuracy", "glcm3d_accuracy"],
            rows.iter()
                .map(|r| {
                    vec![
                        r.velocity_mm_s.to_string(),
                        r.taxel.accuracy.to_string(),
                        r.glcm2d.accuracy.to_string(),
                        r.glcm3d.accuracy.to_string(),
                    ]
                })
                .collect(),
        )?);
        for r in rows {
            let name = format!("confusion_glcm2d_v{}.csv", r.velocity_mm_s);
            written.push(confusion(dir, &name, labels, &r.glcm2d.confusion)?);
        }
    }
    if let Some(rows) = &report.tor {
        written.push(table(
            dir,
            "tor.csv",
            &["velocity_mm_s", "fraction", "glcm3d_accuracy", "taxel_reference"],
            rows.iter()
                .flat_map(|r| {
                    r.points.iter().map(move |p| {
                        vec![
                            r.velocity_mm_s.to_string(),
                            p.fraction.to_string(),
                            p.accuracy.to_string(),
                            r.taxel_reference.to_string(),
                        ]
                    })
                })
                .collect(),
        )?);
    }
    if let Some(rows) = &report.velocity {
        written.push(table(
            dir,
            "velocity.csv",
            &["test_velocity_mm_s", "taxel_accuracy", "glcm3d_accuracy", "change_pct"],
            rows.iter()
                .map(|r| {
                    vec![
                        r.test_velocity_mm_s.to_string(),
                        r.taxel.accuracy.to_string(),
                        r.glcm3d.accuracy.to_string(),
                        opt(r.change_pct),
                    ]
                })
                .collect(),
        )?);
    }
    if let Some(g) = &report.gain_sweep {
        let (path, mut out) = create(dir, "isi_histograms.csv")?;
        write_isi_histograms(&g.histograms, &mut out)?;
        out.flush()?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_metadata(meta: &RunMetadata, dir: &Path) -> Result<PathBuf> {
    let (path, mut out) = create(dir, "metadata.json")?;
    serde_json::to_writer_pretty(&mut out, meta)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(path)
}
