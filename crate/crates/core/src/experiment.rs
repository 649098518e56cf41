//! Reproducible run directories.
//!
//! A run directory holds everything needed to audit or repeat a run:
//!
//! ```text
//! manifest.json        resolved config, dataset digest, tool version, seed
//! config.snapshot      the same config as flat key = value text
//! ri_history.csv       epoch,ri,delta,eps
//! labels_epoch_{k}.csv pseudo labels used in epoch k (index,label; noise = -1)
//! labels_final.csv     clustering of the final features
//! encoder.bin          encoder rows of W then b, embedding file format
//! metrics.json         retrieval and clustering metrics
//! ```

use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{parse_value, read_key_values, render_key_values};
use crate::embedding::{load_csv, load_embeddings, save_embeddings, FeatureMatrix, SampleMeta};
use crate::encoder::{extract_features, EncoderParams, OptimizerKind};
use crate::error::{CpcError, Result};
use crate::evaluation::{clustering_quality, evaluate_retrieval, Metrics, Protocol};
use crate::synth::{generate, split_query_gallery, SynthConfig};
use crate::trainer::{baseline_config, cluster_features, run_cpc, TrainConfig, TrainOutcome};
use crate::dbscan::ClusterParams;

pub const DATA_FILE: &str = "data.cpce";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Training settings for the default synthetic benchmark. The starting
/// radius sits in the plateau where DBSCAN separates clothes; fifty
/// relaxations of 0.01 can reach the plateau where it separates identities.
/// Adam at 3e-3 moves the linear encoder; plain SGD at 3.5e-4 leaves it
/// almost exactly at its initialisation.
pub fn benchmark_train_config() -> TrainConfig {
    TrainConfig {
        eps0: 0.25,
        optimizer: OptimizerKind::Adam,
        learning_rate: 3e-3,
        ..TrainConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub protocol: Protocol,
    pub split_ratio: f64,
    pub max_rank: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::LongTerm,
            split_ratio: 0.5,
            max_rank: 20,
        }
    }
}

/// Training plus evaluation settings for one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "protocol" => self.eval.protocol = value.parse()?,
            "split_ratio" => self.eval.split_ratio = parse_value("split_ratio", value)?,
            "max_rank" => self.eval.max_rank = parse_value("max_rank", value)?,
            _ => self.train.set(key, value)?,
        }
        Ok(())
    }

    pub fn apply(&mut self, entries: &[(String, String)]) -> Result<()> {
        entries.iter().try_for_each(|(k, v)| self.set(k, v))
    }

    pub fn entries(&self) -> Vec<(String, String)> {
        let mut e = self.train.entries();
        e.push(("protocol".into(), self.eval.protocol.as_str().into()));
        e.push(("split_ratio".into(), format!("{:?}", self.eval.split_ratio)));
        e.push(("max_rank".into(), self.eval.max_rank.to_string()));
        e
    }

    pub fn benchmark() -> Self {
        Self {
            train: benchmark_train_config(),
            eval: EvalConfig::default(),
        }
    }

    /// Built-in defaults, then the config file, then explicit overrides.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        Self::resolve_over(Self::default(), file, overrides)
    }

    pub fn resolve_over(
        base: Self,
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut cfg = base;
        if let Some(path) = file {
            cfg.apply(&read_key_values(path)?)?;
        }
        cfg.apply(overrides)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything that determines a run's outputs.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<InputDigest>,
}

impl RunManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CpcError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path, serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn config_entries(&self) -> Vec<(String, String)> {
        self.config.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| CpcError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_file(path: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, contents).map_err(|e| CpcError::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CpcError::io(path, e))
}

/// Accepts a dataset directory (containing `data.cpce`), a `.cpce` file or
/// a `.csv` file.
pub fn resolve_dataset_path(path: impl AsRef<Path>) -> PathBuf {
    let path = path.as_ref();
    if path.is_dir() {
        path.join(DATA_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(FeatureMatrix, Option<SampleMeta>)> {
    let file = resolve_dataset_path(path);
    if file.extension().is_some_and(|e| e == "csv") {
        let (f, m) = load_csv(&file)?;
        Ok((f, Some(m)))
    } else {
        load_embeddings(&file)
    }
}

/// Generates a synthetic dataset into `dir` with its manifest and config
/// snapshot.
pub fn write_synthetic_dataset(config: &SynthConfig, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    let (f, meta) = generate(config)?;
    let data = dir.join(DATA_FILE);
    save_embeddings(&data, &f, Some(&meta))?;
    let entries = config.entries();
    write_file(dir.join("synth.snapshot"), render_key_values(&entries))?;
    RunManifest {
        tool: "cpc synth".into(),
        version: TOOL_VERSION.into(),
        seed: config.seed,
        config: entries.into_iter().collect(),
        inputs: vec![InputDigest {
            path: data.clone(),
            sha256: sha256_file(&data)?,
        }],
    }
    .write(dir.join(MANIFEST_FILE))?;
    Ok(data)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub outcome: TrainOutcome,
    pub metrics: Metrics,
    pub manifest: RunManifest,
}

/// Trains on every sample, then scores the final clustering against the
/// ground-truth identities and the final encoder on a seeded query/gallery
/// split.
pub fn evaluate_outcome(
    outcome: &TrainOutcome,
    meta: &SampleMeta,
    config: &RunConfig,
) -> Result<Metrics> {
    let quality = clustering_quality(&outcome.labels, meta)?;
    let retrieval = evaluate_split(&outcome.features, meta, &config.eval, config.train.seed)?;
    Ok(Metrics::new(&retrieval, &quality))
}

pub fn evaluate_split(
    features: &FeatureMatrix,
    meta: &SampleMeta,
    eval: &EvalConfig,
    seed: u64,
) -> Result<crate::evaluation::RetrievalResult> {
    let split = split_query_gallery(meta, eval.split_ratio, seed)?;
    evaluate_retrieval(
        &features.select(&split.query)?,
        &meta.select(&split.query),
        &features.select(&split.gallery)?,
        &meta.select(&split.gallery),
        eval.protocol,
        eval.max_rank,
    )
}

pub fn run_experiment(
    data: impl AsRef<Path>,
    config: &RunConfig,
    out_dir: impl AsRef<Path>,
) -> Result<RunReport> {
    let data = resolve_dataset_path(data);
    let out_dir = out_dir.as_ref();
    config.train.validate()?;
    let (raw, meta) = load_dataset(&data)?;
    let meta = meta.ok_or(CpcError::MissingMeta)?;

    let outcome = run_cpc(&raw, &config.train)?;
    let metrics = evaluate_outcome(&outcome, &meta, config)?;

    let entries = config.entries();
    let manifest = RunManifest {
        tool: "cpc run".into(),
        version: TOOL_VERSION.into(),
        seed: config.train.seed,
        config: entries.iter().cloned().collect(),
        inputs: vec![InputDigest {
            path: data.clone(),
            sha256: sha256_file(&data)?,
        }],
    };

    create_dir(out_dir)?;
    manifest.write(out_dir.join(MANIFEST_FILE))?;
    write_file(out_dir.join("config.snapshot"), render_key_values(&entries))?;
    write_file(out_dir.join("ri_history.csv"), outcome.state.history_csv())?;
    for (k, labels) in outcome.epoch_labels.iter().enumerate() {
        write_file(out_dir.join(format!("labels_epoch_{k}.csv")), labels.to_csv())?;
    }
    write_file(out_dir.join("labels_final.csv"), outcome.labels.to_csv())?;
    save_embeddings(out_dir.join("encoder.bin"), &outcome.encoder.to_matrix(), None)?;
    write_file(
        out_dir.join("metrics.json"),
        serde_json::to_string_pretty(&metrics)? + "\n",
    )?;

    Ok(RunReport {
        outcome,
        metrics,
        manifest,
    })
}

/// Same as [`run_experiment`] with the curriculum switched off.
pub fn run_baseline_experiment(
    data: impl AsRef<Path>,
    config: &RunConfig,
    out_dir: impl AsRef<Path>,
) -> Result<RunReport> {
    let config = RunConfig {
        train: baseline_config(&config.train),
        eval: config.eval.clone(),
    };
    run_experiment(data, &config, out_dir)
}

/// Re-runs a manifest after checking the dataset digest.
pub fn run_from_manifest(
    manifest_path: impl AsRef<Path>,
    out_dir: impl AsRef<Path>,
) -> Result<RunReport> {
    let manifest = RunManifest::read(manifest_path)?;
    let input = manifest
        .inputs
        .first()
        .ok_or_else(|| CpcError::invalid("manifest", "no input dataset recorded"))?;
    let found = sha256_file(&input.path)?;
    if found != input.sha256 {
        return Err(CpcError::DigestMismatch {
            path: input.path.clone(),
            expected: input.sha256.clone(),
            found,
        });
    }
    let mut config = RunConfig::default();
    config.apply(&manifest.config_entries())?;
    run_experiment(&input.path, &config, out_dir)
}

/// Scores a saved encoder on a dataset: clusters the encoded features at
/// `params` and evaluates retrieval on the seeded split.
pub fn evaluate_encoder(
    data: impl AsRef<Path>,
    encoder_path: impl AsRef<Path>,
    params: &ClusterParams,
    eval: &EvalConfig,
    normalize: bool,
    seed: u64,
) -> Result<Metrics> {
    let (raw, meta) = load_dataset(data)?;
    let meta = meta.ok_or(CpcError::MissingMeta)?;
    let (m, _) = load_embeddings(encoder_path)?;
    let encoder = EncoderParams::from_matrix(&m)?;
    let features = extract_features(&encoder, &raw, normalize)?;
    score_features(&features, &meta, params, eval, seed)
}

pub fn score_features(
    features: &FeatureMatrix,
    meta: &SampleMeta,
    params: &ClusterParams,
    eval: &EvalConfig,
    seed: u64,
) -> Result<Metrics> {
    let labels = cluster_features(features, params)?;
    let quality = clustering_quality(&labels, meta)?;
    let retrieval = evaluate_split(features, meta, eval, seed)?;
    Ok(Metrics::new(&retrieval, &quality))
}

/// One-hot identity embeddings: the best features any encoder could
/// produce for identity retrieval.
pub fn identity_oracle_features(meta: &SampleMeta) -> Result<FeatureMatrix> {
    let mut ids: Vec<u32> = meta.identities();
    ids.sort_unstable();
    ids.dedup();
    let d = ids.len().max(2);
    let mut data = vec![0.0; meta.len() * d];
    for (i, r) in meta.records.iter().enumerate() {
        let k = ids.binary_search(&r.identity).expect("identity present");
        data[i * d + k] = 1.0;
    }
    FeatureMatrix::new(meta.len(), d, data)
}
