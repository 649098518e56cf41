//! Retrieval on raw synthetic features and on one-hot identity features,
//! under the standard and the long-term protocol.
//!
//! ```text
//! cargo run --example retrieval_eval
//! ```

use cpc::evaluation::Protocol;
use cpc::experiment::{evaluate_split, identity_oracle_features, EvalConfig};
use cpc::synth::{generate, SynthConfig};

fn main() -> anyhow::Result<()> {
    let (raw, meta) = generate(&SynthConfig {
        noise_sigma: 0.2,
        ..SynthConfig::default()
    })?;
    let oracle = identity_oracle_features(&meta)?;
    println!(
        "{:>8} {:>10} {:>8} {:>8} {:>8} {:>8}",
        "features", "protocol", "valid", "mAP", "rank-1", "rank-5"
    );
    for (name, f) in [("raw", &raw), ("oracle", &oracle)] {
        for protocol in [Protocol::Standard, Protocol::LongTerm] {
            let eval = EvalConfig {
                protocol,
                ..EvalConfig::default()
            };
            let r = evaluate_split(f, &meta, &eval, 0)?;
            println!(
                "{name:>8} {:>10} {:>8} {:>8.4} {:>8.4} {:>8.4}",
                protocol.as_str(),
                r.num_valid_queries,
                r.map,
                r.rank(1),
                r.rank(5)
            );
        }
    }
    Ok(())
}
