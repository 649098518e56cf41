//! Generates the default synthetic clothes-change dataset, writes it in the
//! binary embedding format and reads it back.
//!
//! ```text
//! cargo run --example synth_dataset -- [out_dir]
//! ```

use cpc::embedding::norm;
use cpc::experiment::{load_dataset, write_synthetic_dataset};
use cpc::synth::{split_query_gallery, SynthConfig};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/synth-demo".into());
    let config = SynthConfig::default();
    let path = write_synthetic_dataset(&config, &out)?;

    let (f, meta) = load_dataset(&path)?;
    let meta = meta.expect("synthetic data carries metadata");
    println!("{} samples of dim {} in {}", f.rows(), f.dim(), path.display());
    println!("first rows (identity, clothes, camera, timestamp, |f|):");
    for (i, r) in meta.records.iter().take(6).enumerate() {
        println!(
            "  {:>3} {:>3} {:>3} {:>6} {:.6}",
            r.identity,
            r.clothes,
            r.camera,
            r.timestamp,
            norm(f.row(i))
        );
    }

    let split = split_query_gallery(&meta, 0.5, config.seed)?;
    println!("query {} / gallery {}", split.query.len(), split.gallery.len());
    Ok(())
}
