//! Curriculum vs. fixed-radius clustering on the default synthetic
//! clothes-change benchmark, one line per seed.
//!
//! ```text
//! cargo run --release --example ablation -- [num_seeds]
//! ```

use cpc::experiment::{evaluate_outcome, RunConfig};
use cpc::synth::{generate, SynthConfig};
use cpc::{run_baseline, run_cpc};

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
    let config = RunConfig {
        train: cpc::experiment::benchmark_train_config(),
        ..RunConfig::default()
    };

    println!(
        "{:>4} | {:>8} {:>8} {:>6} {:>6} | {:>8} {:>8} {:>6} {:>6}",
        "seed", "cpc f1", "cpc mAP", "C", "eps", "base f1", "base mAP", "C", "eps"
    );
    let mut wins = 0;
    for seed in 0..seeds {
        let (raw, meta) = generate(&SynthConfig {
            seed,
            ..SynthConfig::default()
        })?;
        let mut run = config.clone();
        run.train.seed = seed;

        let cpc = run_cpc(&raw, &run.train)?;
        let base = run_baseline(&raw, &run.train)?;
        let mc = evaluate_outcome(&cpc, &meta, &run)?;
        let mb = evaluate_outcome(&base, &meta, &run)?;
        if mc.pairwise_f1 > mb.pairwise_f1 && mc.map > mb.map {
            wins += 1;
        }
        println!(
            "{seed:>4} | {:>8.3} {:>8.4} {:>6} {:>6.2} | {:>8.3} {:>8.4} {:>6} {:>6.2}",
            mc.pairwise_f1,
            mc.map,
            mc.cluster_count,
            cpc.state.params().eps,
            mb.pairwise_f1,
            mb.map,
            mb.cluster_count,
            base.state.params().eps,
        );
    }
    println!("curriculum ahead on both f1 and mAP in {wins}/{seeds} seeds");
    Ok(())
}
