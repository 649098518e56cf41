use cpc::experiment::{
    benchmark_train_config, run_baseline_experiment, run_experiment, run_from_manifest,
    write_synthetic_dataset, RunConfig, RunManifest,
};
use cpc::synth::{generate, SynthConfig};
use cpc::{run_baseline, run_cpc, CpcError, TrainConfig};

fn short(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        epochs: 8,
        ..benchmark_train_config()
    }
}

#[test]
fn unreachable_threshold_reproduces_baseline() {
    let (raw, _) = generate(&SynthConfig { seed: 4, ..SynthConfig::default() }).unwrap();
    let cfg = short(4);
    let cpc = run_cpc(&raw, &TrainConfig { threshold: 1.1, ..cfg.clone() }).unwrap();
    let base = run_baseline(&raw, &cfg).unwrap();
    assert_eq!(cpc.encoder, base.encoder);
    assert_eq!(cpc.labels, base.labels);
    assert_eq!(cpc.epoch_labels, base.epoch_labels);
    assert_eq!(cpc.state.history_csv(), base.state.history_csv());
}

#[test]
fn curriculum_widens_radius_and_baseline_does_not() {
    let (raw, _) = generate(&SynthConfig::default()).unwrap();
    let cfg = short(0);
    let cpc = run_cpc(&raw, &cfg).unwrap();
    let base = run_baseline(&raw, &cfg).unwrap();
    assert!(cpc.state.params().eps > cfg.eps0);
    assert_eq!(base.state.params().eps, cfg.eps0);
    assert_eq!(cpc.epoch_labels.len(), cfg.epochs);
}

#[test]
fn run_directory_round_trips_through_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic_dataset(&SynthConfig { seed: 2, ..SynthConfig::default() }, dir.path().join("ds")).unwrap();
    let config = RunConfig { train: short(2), ..RunConfig::default() };
    let first = run_experiment(&data, &config, dir.path().join("a")).unwrap();
    let manifest = RunManifest::read(dir.path().join("a/manifest.json")).unwrap();
    assert_eq!(manifest, first.manifest);
    assert_eq!(manifest.seed, 2);

    run_from_manifest(dir.path().join("a/manifest.json"), dir.path().join("b")).unwrap();
    for file in ["ri_history.csv", "metrics.json", "labels_final.csv", "encoder.bin", "config.snapshot"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    for k in 0..8 {
        assert!(dir.path().join(format!("a/labels_epoch_{k}.csv")).is_file());
    }
}

#[test]
fn baseline_run_keeps_eps_column_constant() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic_dataset(&SynthConfig::default(), dir.path().join("ds")).unwrap();
    let config = RunConfig { train: short(0), ..RunConfig::default() };
    run_baseline_experiment(&data, &config, dir.path().join("base")).unwrap();
    let history = std::fs::read_to_string(dir.path().join("base/ri_history.csv")).unwrap();
    let eps: std::collections::BTreeSet<&str> = history.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(eps.len(), 1);
}

#[test]
fn tampered_dataset_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic_dataset(&SynthConfig::default(), dir.path().join("ds")).unwrap();
    let config = RunConfig { train: TrainConfig { epochs: 1, ..short(0) }, ..RunConfig::default() };
    run_experiment(&data, &config, dir.path().join("a")).unwrap();
    let mut bytes = std::fs::read(&data).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&data, bytes).unwrap();
    let err = run_from_manifest(dir.path().join("a/manifest.json"), dir.path().join("b")).unwrap_err();
    assert!(matches!(err, CpcError::DigestMismatch { .. }), "{err}");
}
