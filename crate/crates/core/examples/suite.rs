//! Runs every study on the bundled synthetic corpus and prints a summary.
//!
//! `cargo run --release -p neurotex --example suite [config.json]`

use std::time::Instant;

use neurotex::harness::{self, Experiment};

fn main() -> neurotex::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => harness::ExperimentConfig::from_json(&std::fs::read_to_string(p)?)?,
        None => harness::default_config(),
    };
    let t0 = Instant::now();
    let corpus = harness::Corpus::build(&cfg)?;
    println!("corpus: {} trials in {:.1?}", corpus.trials.len(), t0.elapsed());
    for which in [
        Experiment::Accuracy,
        Experiment::Temporal,
        Experiment::Perturbation,
        Experiment::Tor,
        Experiment::Velocity,
    ] {
        if let Ok(only) = std::env::var("SUITE_ONLY") {
            if !only.split(',').any(|n| n == which.as_str()) {
                continue;
            }
        }
        let t = Instant::now();
        let r = harness::run_on_corpus(which, &cfg, &corpus)?;
        println!("-- {} ({:.1?})", which.as_str(), t.elapsed());
        for row in r.accuracy.iter().flatten() {
            println!(
                "v={:>4}  taxel {:.3}  glcm3d {:.3}",
                row.velocity_mm_s, row.taxel.accuracy, row.glcm3d.accuracy
            );
            if std::env::var_os("SUITE_CONFUSION").is_some() {
                for (name, cm) in [("taxel", &row.taxel.confusion), ("glcm3d", &row.glcm3d.confusion)] {
                    println!("  {name}");
                    for (label, counts) in r.labels.iter().zip(cm) {
                        println!("  {label:>16} {counts:?}");
                    }
                }
            }
        }
        for row in r.temporal.iter().flatten() {
            println!(
                "v={:>4}  taxel {:.3}  glcm2d {:.3}  glcm3d {:.3}",
                row.velocity_mm_s, row.taxel.accuracy, row.glcm2d.accuracy, row.glcm3d.accuracy
            );
        }
        for row in r.perturbation.iter().flatten() {
            let pts: Vec<String> = row.points.iter().map(|p| format!("{}:{:.3}", p.n, p.mean)).collect();
            println!(
                "v={:>4}  ref {:.3}  {}",
                row.velocity_mm_s,
                row.taxel_reference,
                pts.join(" ")
            );
        }
        for row in r.tor.iter().flatten() {
            let pts: Vec<String> = row
                .points
                .iter()
                .map(|p| format!("{}:{:.3}", p.fraction, p.accuracy))
                .collect();
            println!(
                "v={:>4}  ref {:.3}  first {:?}  {}",
                row.velocity_mm_s,
                row.taxel_reference,
                row.smallest_matching_fraction,
                pts.join(" ")
            );
        }
        for row in r.velocity.iter().flatten() {
            println!(
                "test v={:>4}  taxel {:.3}  glcm3d {:.3}",
                row.test_velocity_mm_s, row.taxel.accuracy, row.glcm3d.accuracy
            );
        }
    }
    println!("total {:.1?}", t0.elapsed());
    Ok(())
}
