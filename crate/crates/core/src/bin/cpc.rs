//! `cpc` command-line tool.
//!
//! ```text
//! cpc synth --out ds/
//! cpc run --data ds/ --out runs/cpc
//! cpc run --data ds/ --no-curriculum --out runs/base
//! cpc eval --data ds/ --encoder runs/cpc/encoder.bin --protocol long_term
//! cpc cluster --data ds/ --eps 0.6
//! ```
//!
//! Exit status is 0 on success, 1 when the command fails and 2 for usage
//! errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use cpc::evaluation::Protocol;
use cpc::experiment::{
    evaluate_encoder, identity_oracle_features, load_dataset, run_baseline_experiment,
    run_experiment, run_from_manifest, score_features, write_synthetic_dataset, EvalConfig,
    RunConfig, RunReport,
};
use cpc::synth::SynthConfig;
use cpc::trainer::cluster_features;
use cpc::ClusterParams;

const THREADS_ENV: &str = "CPC_THREADS";

#[derive(Parser)]
#[command(name = "cpc", version, about = "Curriculum person clustering experiments")]
struct Cli {
    /// Worker threads (0 = one per core). CPC_THREADS takes precedence.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic clothes-change dataset.
    Synth(SynthArgs),
    /// Train with the curriculum (or without it) and evaluate.
    Run(RunArgs),
    /// Evaluate a saved encoder, or the identity oracle, on a dataset.
    Eval(EvalArgs),
    /// One-shot DBSCAN over a dataset's features.
    Cluster(ClusterArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    ids: usize,
    #[arg(long, default_value_t = 3)]
    clothes: usize,
    #[arg(long, default_value_t = 25)]
    per: usize,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 1.2)]
    separation: f64,
    #[arg(long, default_value_t = 0.4)]
    offset: f64,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long, default_value_t = 4)]
    cameras: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset directory, `.cpce` file or `.csv` file.
    #[arg(long, required_unless_present = "manifest")]
    data: Option<PathBuf>,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay the run recorded in a manifest.
    #[arg(long, conflicts_with_all = ["data", "config", "benchmark", "no_curriculum", "set", "epochs", "seed"])]
    manifest: Option<PathBuf>,
    /// Start from the synthetic benchmark settings instead of the defaults.
    #[arg(long)]
    benchmark: bool,
    /// Keep the radius fixed at eps0.
    #[arg(long)]
    no_curriculum: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_key_value)]
    set: Vec<(String, String)>,
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("features").required(true).args(["encoder", "oracle"]))]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    /// Encoder written by `cpc run`.
    #[arg(long)]
    encoder: Option<PathBuf>,
    /// Score one-hot identity features instead of an encoder.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value = "long_term")]
    protocol: Protocol,
    /// Radius for clustering the encoded features.
    #[arg(long, default_value_t = 0.6)]
    eps: f64,
    #[arg(long, default_value_t = 4)]
    min_pts: usize,
    /// Seed for the query/gallery split.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    split_ratio: f64,
    #[arg(long, default_value_t = 20)]
    max_rank: usize,
    /// Skip L2 normalization of encoder outputs.
    #[arg(long)]
    no_normalize: bool,
    /// Write metrics here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 4)]
    min_pts: usize,
    /// Write `index,label` rows here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn worker_threads(flag: usize) -> anyhow::Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")),
        Err(_) => Ok(flag),
    }
}

fn write_or_print(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let config = SynthConfig {
        num_identities: args.ids,
        clothes_per_identity: args.clothes,
        samples_per_clothes: args.per,
        dim: args.dim,
        identity_separation: args.separation,
        clothes_offset: args.offset,
        noise_sigma: args.sigma,
        cameras: args.cameras,
        seed: args.seed,
    };
    let path = write_synthetic_dataset(&config, &args.out)?;
    println!("wrote {} samples to {}", config.num_samples(), path.display());
    Ok(())
}

fn run(args: RunArgs) -> anyhow::Result<()> {
    let report: RunReport = if let Some(manifest) = &args.manifest {
        run_from_manifest(manifest, &args.out)?
    } else {
        let data = args.data.as_ref().expect("clap requires --data without --manifest");
        let mut overrides = args.set.clone();
        if let Some(e) = args.epochs {
            overrides.push(("epochs".into(), e.to_string()));
        }
        if let Some(s) = args.seed {
            overrides.push(("seed".into(), s.to_string()));
        }
        let base = if args.benchmark {
            RunConfig::benchmark()
        } else {
            RunConfig::default()
        };
        let config = RunConfig::resolve_over(base, args.config.as_deref(), &overrides)?;
        if args.no_curriculum {
            run_baseline_experiment(data, &config, &args.out)?
        } else {
            run_experiment(data, &config, &args.out)?
        }
    };
    let m = &report.metrics;
    println!(
        "clusters {}  eps {:.4}  pairwise_f1 {:.4}  ari {:.4}  mAP {:.4}  rank-1 {:.4}",
        m.cluster_count,
        report.outcome.state.params().eps,
        m.pairwise_f1,
        m.ari,
        m.map,
        m.cmc.first().copied().unwrap_or(0.0),
    );
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let params = ClusterParams::new(args.eps, args.min_pts)?;
    let eval = EvalConfig {
        protocol: args.protocol,
        split_ratio: args.split_ratio,
        max_rank: args.max_rank,
    };
    let metrics = match &args.encoder {
        Some(encoder) => {
            if !encoder.is_file() {
                bail!("encoder file {} not found", encoder.display());
            }
            evaluate_encoder(&args.data, encoder, &params, &eval, !args.no_normalize, args.seed)?
        }
        None => {
            let (_, meta) = load_dataset(&args.data)?;
            let meta = meta.context("dataset has no sample metadata")?;
            let features = identity_oracle_features(&meta)?;
            score_features(&features, &meta, &params, &eval, args.seed)?
        }
    };
    write_or_print(args.out.as_deref(), &(serde_json::to_string_pretty(&metrics)? + "\n"))
}

fn cluster(args: ClusterArgs) -> anyhow::Result<()> {
    let params = ClusterParams::new(args.eps, args.min_pts)?;
    let (features, _) = load_dataset(&args.data)?;
    let labels = cluster_features(&features, &params)?;
    log::info!(
        "{} clusters, {} noise",
        labels.num_clusters(),
        labels.len() - labels.num_clustered()
    );
    write_or_print(args.out.as_deref(), &labels.to_csv())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let threads = match worker_threads(cli.threads) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        log::warn!("thread pool already initialised: {e}");
    }

    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Cluster(a) => cluster(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
