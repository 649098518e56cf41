//! Relaxing index of ground-truth clusterings as the sample noise grows,
//! for each similarity variant.
//!
//! ```text
//! cargo run --example relaxing_index
//! ```

use cpc::synth::{generate, SynthConfig};
use cpc::{relabel_compact, relaxing_index, scheduler_delta, ClusterBank, RiVariant};

fn main() -> anyhow::Result<()> {
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10}",
        "sigma", "level", "pearson", "raw", "cosine"
    );
    for sigma in [0.0, 0.02, 0.05, 0.1, 0.2, 0.3] {
        let (f, meta) = generate(&SynthConfig {
            noise_sigma: sigma,
            ..SynthConfig::default()
        })?;
        let by_identity: Vec<_> = meta.records.iter().map(|r| Some(r.identity)).collect();
        let by_clothes: Vec<_> = meta.records.iter().map(|r| Some(r.clothes)).collect();
        for (level, labels) in [
            ("identity", relabel_compact(&by_identity)),
            ("clothes", relabel_compact(&by_clothes)),
        ] {
            let bank = ClusterBank::init(&f, &labels, 0.2, true)?;
            let ri = |v| relaxing_index(&f, &labels, &bank, v);
            let pearson = ri(RiVariant::Pearson)?;
            println!(
                "{sigma:>6.2} {level:>10} {pearson:>10.4} {:>10.4} {:>10.4}   relax at T=0.8: {}",
                ri(RiVariant::Raw)?,
                ri(RiVariant::Cosine)?,
                scheduler_delta(pearson, 0.8)
            );
        }
    }
    Ok(())
}
