use neurotex::classify::stratified_folds;
use neurotex::glcm::{glcm_features, GlcmMode};
use neurotex::harness::{
    cross_validate_arrays, default_config, fold_seed, report_json, run, run_on_corpus, run_temporal_collapse_study,
    write_report, Approach, Corpus, DataSource, Experiment, ExperimentConfig, TraceSource,
};
use neurotex::neuron::encode_array;
use neurotex::signal::{preprocess, LabeledTexture, SyntheticCorpusSpec, TextureParams};
use neurotex::spikestats::single_taxel_features;
use neurotex::volume::{build_volume, fit_quantizer};
use neurotex::Error;

fn texture(label: &str, period: f64, baseline: f64, seed: u64) -> LabeledTexture {
    LabeledTexture {
        label: label.into(),
        params: TextureParams {
            spatial_period_mm: period,
            amplitude: 0.7,
            baseline,
            harmonic_weights: vec![1.0, 0.4],
            roughness_noise_sd: 0.1,
            profile_seed: seed,
            start_jitter_mm: 5.0,
            ..Default::default()
        },
    }
}

/// Four textures, three velocities, five trials, 20 mm slides.
fn small_config() -> ExperimentConfig {
    let spec = SyntheticCorpusSpec {
        version: 1,
        geometry: Default::default(),
        sample_rate_hz: 1000.0,
        slide_distance_mm: 20.0,
        noise_sd: 0.05,
        velocities: vec![5.0, 10.0, 15.0],
        trials: 5,
        seed: 3,
        textures: vec![
            texture("a", 2.0, 0.0, 1),
            texture("b", 3.25, 0.1, 2),
            texture("c", 5.0, 0.2, 3),
            texture("d", 8.0, 0.3, 4),
        ],
    };
    let mut cfg = ExperimentConfig::with_data(DataSource::Synthetic(spec));
    cfg.seed = 11;
    cfg.perturbation.repeats = 2;
    cfg.perturbation.n_values = vec![0, 2, 16];
    cfg.tor.fractions = vec![0.5, 1.0];
    cfg.knn.k_sweep = vec![1, 3];
    cfg.gain_sweep.gains = vec![5.0, 8.0, 20.0];
    cfg.gain_sweep.trials_per_label = 2;
    cfg
}

#[test]
fn harness_features_equal_direct_module_calls() {
    let cfg = small_config();
    let corpus = Corpus::build(&cfg).unwrap();
    let DataSource::Synthetic(spec) = &cfg.data else {
        unreachable!()
    };

    // Trial order follows the source order: texture, velocity, trial.
    let sources = neurotex::harness::trace_sources(&cfg).unwrap();
    for (trial, src) in corpus.trials.iter().zip(&sources) {
        let TraceSource::Synthetic(t, v, k) = *src else {
            unreachable!()
        };
        let direct = encode_array(
            &preprocess(&spec.generate(t, v, k).unwrap(), 50.0).unwrap(),
            &cfg.neuron,
        )
        .unwrap();
        assert_eq!(trial.spikes, direct);
    }

    // Fold-local quantizers are fitted on exactly the training volumes.
    let idx = corpus.at_velocity(1);
    let arrays: Vec<_> = idx.iter().map(|&i| &corpus.trials[i].spikes).collect();
    let labels: Vec<usize> = idx.iter().map(|&i| corpus.trials[i].label).collect();
    let seed = fold_seed(cfg.seed, 1);
    let run = cross_validate_arrays(&cfg, &corpus.labels, &arrays, &labels, Approach::Glcm3d, None, seed, 5).unwrap();
    let folds = stratified_folds(&labels, 5, seed).unwrap();
    let volumes: Vec<_> = arrays.iter().map(|a| build_volume(a, cfg.bin_s).unwrap()).collect();
    for (f, q) in run.quantizers.iter().enumerate() {
        let train: Vec<_> = (0..volumes.len())
            .filter(|&i| folds[i] != f)
            .map(|i| volumes[i].clone())
            .collect();
        assert_eq!(*q, fit_quantizer(&train, cfg.num_levels).unwrap());
        // And the features the harness classifies are the module's features.
        let offsets = cfg.offset_vectors().unwrap();
        let direct = glcm_features(&volumes[0], GlcmMode::Glcm3d, q, &offsets).unwrap();
        assert!(direct.asm > 0.0);
    }

    let t = single_taxel_features(&corpus.trials[0].spikes, 1, 1, 0.5)
        .unwrap()
        .vector();
    assert_eq!(
        t,
        neurotex::harness::taxel_vector(&corpus.trials[0].spikes, &cfg.single_taxel).unwrap()
    );
}

#[test]
fn full_run_is_byte_identical_and_writes_every_table() {
    let cfg = small_config();
    let a = report_json(&run(Experiment::All, &cfg).unwrap()).unwrap();
    let b = report_json(&run(Experiment::All, &cfg).unwrap()).unwrap();
    assert_eq!(a, b);

    let report = run(Experiment::All, &cfg).unwrap();
    let dir = std::env::temp_dir().join(format!("neurotex-report-{}", std::process::id()));
    let files = write_report(&report, &dir).unwrap();
    for name in [
        "report.json",
        "accuracy.csv",
        "perturbation.csv",
        "temporal.csv",
        "tor.csv",
        "velocity.csv",
        "isi_histograms.csv",
    ] {
        assert!(files.iter().any(|f| f.ends_with(name)), "missing {name}");
    }
    std::fs::remove_dir_all(dir).ok();

    // n = 0 is the unperturbed 3D accuracy.
    let acc = report.accuracy.as_ref().unwrap();
    for (row, p) in acc.iter().zip(report.perturbation.as_ref().unwrap()) {
        assert_eq!(p.points[0].n, 0);
        assert_eq!(p.points[0].mean, row.glcm3d.accuracy);
        assert_eq!(p.taxel_reference, row.taxel.accuracy);
    }
}

#[test]
fn perturbation_sizes_outside_the_grid_are_rejected() {
    let mut cfg = small_config();
    cfg.perturbation.n_values = vec![1];
    let err = run(Experiment::Perturbation, &cfg).unwrap_err();
    assert!(matches!(err, Error::InvalidParameter(_)), "{err}");
    cfg.perturbation.n_values = vec![17];
    assert!(run(Experiment::Perturbation, &cfg).is_err());
}

#[test]
fn velocity_study_needs_three_velocities() {
    let mut cfg = small_config();
    if let DataSource::Synthetic(spec) = &mut cfg.data {
        spec.velocities = vec![5.0, 10.0];
    }
    let err = run(Experiment::Velocity, &cfg).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)), "{err}");
}

#[test]
fn mean_isi_shrinks_as_gain_grows() {
    let cfg = small_config();
    let sweep = run(Experiment::GainSweep, &cfg).unwrap().gain_sweep.unwrap();
    for label in ["a", "b", "c", "d"] {
        let means: Vec<f64> = sweep
            .histograms
            .iter()
            .filter(|h| h.label == label)
            .map(|h| h.mean_isi_s.unwrap())
            .collect();
        assert_eq!(means.len(), 3);
        assert!(means[0] > means[1] && means[1] > means[2], "{label}: {means:?}");
    }
}

#[test]
fn time_collapse_cannot_see_purely_temporal_differences() {
    // Same level distribution, different periods, and textures that look
    // alike across the grid once time is averaged out.
    let periods = [2.0, 3.25, 5.0, 8.0];
    let textures = periods
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut t = texture(&format!("p{i}"), p, 0.1, 40 + i as u64);
            t.params.harmonic_weights = vec![1.0];
            t.params.roughness_noise_sd = 0.0;
            t.params.start_jitter_mm = 40.0;
            t
        })
        .collect();
    let spec = SyntheticCorpusSpec {
        version: 1,
        geometry: Default::default(),
        sample_rate_hz: 1000.0,
        slide_distance_mm: 48.0,
        noise_sd: 0.05,
        velocities: vec![8.0],
        trials: 20,
        seed: 5,
        textures,
    };
    let mut cfg = ExperimentConfig::with_data(DataSource::Synthetic(spec));
    cfg.seed = 2;
    let corpus = Corpus::build(&cfg).unwrap();
    let row = &run_temporal_collapse_study(&cfg, &corpus).unwrap()[0];
    let chance = 1.0 / periods.len() as f64;
    assert!(
        (row.glcm2d.accuracy - chance).abs() <= 0.15,
        "2D {}",
        row.glcm2d.accuracy
    );
    assert!(
        row.glcm3d.accuracy > row.glcm2d.accuracy + 0.3,
        "3D {}",
        row.glcm3d.accuracy
    );
}

#[test]
fn bundled_config_describes_the_reference_corpus() {
    let cfg = default_config();
    let DataSource::Synthetic(spec) = &cfg.data else {
        panic!("bundled corpus is synthetic")
    };
    assert_eq!(spec.textures.len(), 8);
    assert_eq!(spec.velocities, vec![5.0, 10.0, 15.0]);
    assert_eq!(spec.trials, 20);
    let mut periods: Vec<f64> = spec.textures.iter().map(|t| t.params.spatial_period_mm).collect();
    periods.sort_by(f64::total_cmp);
    periods.dedup();
    assert_eq!(periods, vec![2.0, 3.25, 5.0, 8.0]);
    let corpus_one = Corpus::build(&ExperimentConfig {
        data: DataSource::Synthetic(SyntheticCorpusSpec {
            trials: 1,
            ..spec.clone()
        }),
        ..cfg.clone()
    })
    .unwrap();
    assert_eq!(corpus_one.trials.len(), 24);
    assert!(
        run_on_corpus(Experiment::Accuracy, &cfg, &corpus_one).is_err(),
        "one trial per label cannot fill five folds"
    );
}

#[test]
fn malformed_configs_are_rejected() {
    assert!(matches!(ExperimentConfig::from_json("{"), Err(Error::Json(_))));
    let mut cfg = small_config();
    cfg.num_levels = 1;
    assert!(cfg.validate().is_err());
    cfg = small_config();
    cfg.tor.fractions = vec![1.5];
    assert!(cfg.validate().is_err());
    cfg = small_config();
    cfg.offsets.distances = vec![];
    assert!(cfg.validate().is_err());
}
