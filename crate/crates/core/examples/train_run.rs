//! One curriculum training run on the synthetic benchmark, printing the
//! relaxing index, radius and cluster count every few epochs.
//!
//! ```text
//! cargo run --release --example train_run -- [seed]
//! ```

use cpc::experiment::{evaluate_outcome, RunConfig};
use cpc::synth::{generate, SynthConfig};
use cpc::run_cpc;

fn main() -> anyhow::Result<()> {
    env_logger::init();
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let (raw, meta) = generate(&SynthConfig {
        seed,
        ..SynthConfig::default()
    })?;
    let mut run = RunConfig::benchmark();
    run.train.seed = seed;

    let out = run_cpc(&raw, &run.train)?;
    println!("{:>5} {:>8} {:>5} {:>6} {:>8}", "epoch", "ri", "delta", "eps", "clusters");
    for (r, labels) in out.state.history().iter().zip(&out.epoch_labels).step_by(5) {
        println!(
            "{:>5} {:>8} {:>5} {:>6.2} {:>8}",
            r.epoch,
            r.ri.map_or("-".into(), |v| format!("{v:.4}")),
            r.delta,
            r.eps,
            labels.num_clusters()
        );
    }
    let m = evaluate_outcome(&out, &meta, &run)?;
    println!(
        "final: {} clusters, pairwise f1 {:.3}, ari {:.3}, long-term mAP {:.4}, rank-1 {:.4}",
        m.cluster_count, m.pairwise_f1, m.ari, m.map, m.cmc[0]
    );
    Ok(())
}
