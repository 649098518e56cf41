//! Builds a cluster-center memory bank from a clothes-level clustering,
//! scores one sample against it and nudges its center with EMA updates.
//!
//! ```text
//! cargo run --example memory_bank
//! ```

use cpc::synth::{generate, SynthConfig};
use cpc::{contrastive_loss, dbscan, pairwise_distances, ClusterBank, ClusterParams};

fn main() -> anyhow::Result<()> {
    let (f, _) = generate(&SynthConfig::default())?;
    let labels = dbscan(&pairwise_distances(&f), &ClusterParams::new(0.3, 4)?)?;
    let mut bank = ClusterBank::init(&f, &labels, 0.2, true)?;
    println!("{} centers of dim {}", bank.num_clusters(), bank.dim());

    let i = labels.clustered_indices()[0];
    let own = labels.get(i).expect("clustered");
    let logits = bank.logits(f.row(i), 0.05)?;
    let mut top: Vec<(usize, f64)> = logits.iter().copied().enumerate().collect();
    top.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("sample {i} (cluster {own}) strongest logits:");
    for (c, l) in top.iter().take(4) {
        println!("  cluster {c:>3}  {l:8.3}");
    }
    println!("loss {:.6}", contrastive_loss(f.row(i), own, &bank, 0.05)?);

    let before = bank.center(own).to_vec();
    for _ in 0..5 {
        bank.ema_update(own, f.row(i))?;
    }
    let moved: f64 = before
        .iter()
        .zip(bank.center(own))
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    println!("center moved {moved:.6} after five updates towards the sample");
    println!("loss now {:.6}", contrastive_loss(f.row(i), own, &bank, 0.05)?);
    Ok(())
}
