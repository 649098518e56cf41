//! Sweeps the DBSCAN radius over a synthetic clothes-change dataset and
//! reports how many clusters appear and how well they match identities.
//!
//! ```text
//! cargo run --release --example eps_sweep -- [seed]
//! ```

use cpc::evaluation::clustering_quality;
use cpc::synth::{generate, SynthConfig};
use cpc::{dbscan, pairwise_distances, ClusterParams};

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let synth = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    let (f, meta) = generate(&synth)?;
    let dist = pairwise_distances(&f);
    println!(
        "{} ids x {} clothes x {} samples, dim {}",
        synth.num_identities, synth.clothes_per_identity, synth.samples_per_clothes, synth.dim
    );
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}", "eps", "clusters", "noise", "f1", "ari");
    for step in 1..=30 {
        let eps = 0.05 * step as f64;
        let labels = dbscan(&dist, &ClusterParams::new(eps, 4)?)?;
        let q = clustering_quality(&labels, &meta)?;
        println!(
            "{eps:>6.2} {:>8} {:>8} {:>8.3} {:>8.3}",
            labels.num_clusters(),
            labels.len() - labels.num_clustered(),
            q.pairwise_f1,
            q.ari
        );
    }
    Ok(())
}
