mod common;

use common::*;
use cpc::synth::{generate, SynthConfig};
use cpc::{relabel_compact, relaxing_index, ClusterBank, FeatureMatrix, RiVariant};
use proptest::prelude::*;

fn clustering() -> impl Strategy<Value = (FeatureMatrix, Vec<Option<usize>>, bool)> {
    (2usize..30, 2usize..8).prop_flat_map(|(n, d)| {
        (
            prop::collection::vec(-3.0f64..3.0, n * d).prop_map(move |v| FeatureMatrix::new(n, d, v).unwrap()),
            prop::collection::vec(prop::option::weighted(0.8, 0usize..4), n),
            any::<bool>(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn relaxing_index_matches_naive_loop((f, mut raw, normalize) in clustering()) {
        raw[0] = Some(0);
        let labels = relabel_compact(&raw);
        let bank = ClusterBank::init(&f, &labels, 0.2, normalize).unwrap();
        let ri = relaxing_index(&f, &labels, &bank, RiVariant::Pearson).unwrap();
        prop_assume!(ri.is_finite());
        prop_assert!((ri - relaxing_index_oracle(&f, &labels, &bank)).abs() <= 1e-9);
        prop_assert!((-1.0..=1.0).contains(&ri));
        let cosine = relaxing_index(&f, &labels, &bank, RiVariant::Cosine).unwrap();
        prop_assert!((-1.0..=1.0).contains(&cosine));
        prop_assert!(relaxing_index(&f, &labels, &bank, RiVariant::Raw).unwrap().is_finite());
    }

    #[test]
    fn ema_stays_on_segment(
        m in prop::collection::vec(-5.0f64..5.0, 1..8),
        seed in any::<u64>(),
        alpha in 0.0f64..=1.0,
    ) {
        use rand::Rng;
        let mut r = rng(seed);
        let f: Vec<f64> = m.iter().map(|_| r.random_range(-5.0..5.0)).collect();
        let mut bank = ClusterBank::init(&FeatureMatrix::from_rows(std::slice::from_ref(&m)).unwrap(), &relabel_compact(&[Some(0)]), alpha, false).unwrap();
        bank.ema_update(0, &f).unwrap();
        for ((v, a), b) in bank.center(0).iter().zip(&m).zip(&f) {
            prop_assert!(a.min(*b) <= *v && *v <= a.max(*b));
            prop_assert!((v - (alpha * a + (1.0 - alpha) * b)).abs() <= 1e-12);
        }
    }
}

#[test]
fn less_noise_means_higher_relaxing_index() {
    let mut wins = 0;
    for seed in 0..10 {
        let ri = |sigma| {
            let (f, meta) = generate(&SynthConfig { noise_sigma: sigma, seed, ..SynthConfig::default() }).unwrap();
            let labels = relabel_compact(&meta.records.iter().map(|r| Some(r.identity)).collect::<Vec<_>>());
            let bank = ClusterBank::init(&f, &labels, 0.2, true).unwrap();
            relaxing_index(&f, &labels, &bank, RiVariant::Pearson).unwrap()
        };
        wins += usize::from(ri(0.05) > ri(0.2));
    }
    assert!(wins >= 9, "{wins}/10");
}
