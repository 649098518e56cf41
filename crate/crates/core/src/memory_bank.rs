//! Cluster-center memory bank: mean initialization from pseudo labels and
//! per-sample exponential moving average updates.

use std::path::Path;

use crate::dbscan::PseudoLabeling;
use crate::embedding::{dot, normalize_in_place, save_embeddings, FeatureMatrix};
use crate::error::{CpcError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterBank {
    centers: Vec<f64>,
    num_clusters: usize,
    dim: usize,
    alpha: f64,
    normalize: bool,
}

impl ClusterBank {
    /// Centers are the arithmetic means of each cluster's feature rows;
    /// noise rows are ignored. With `normalize` set every center is then
    /// scaled to unit norm.
    pub fn init(
        f: &FeatureMatrix,
        labels: &PseudoLabeling,
        alpha: f64,
        normalize: bool,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(CpcError::invalid("alpha", format!("{alpha} not in [0, 1]")));
        }
        if labels.len() != f.rows() {
            return Err(CpcError::DimensionMismatch {
                expected: f.rows(),
                found: labels.len(),
            });
        }
        let c = labels.num_clusters();
        if c == 0 {
            return Err(CpcError::NothingClustered);
        }
        let d = f.dim();
        let mut centers = vec![0.0; c * d];
        let mut counts = vec![0usize; c];
        for (row, label) in f.iter_rows().zip(labels.labels()) {
            if let Some(k) = *label {
                counts[k] += 1;
                for (acc, v) in centers[k * d..(k + 1) * d].iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        for (k, center) in centers.chunks_exact_mut(d).enumerate() {
            let p = counts[k] as f64;
            center.iter_mut().for_each(|v| *v /= p);
            if normalize {
                normalize_in_place(center);
            }
        }
        Ok(Self {
            centers,
            num_clusters: c,
            dim: d,
            alpha,
            normalize,
        })
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn center(&self, c: usize) -> &[f64] {
        &self.centers[c * self.dim..(c + 1) * self.dim]
    }

    pub fn centers(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.centers.chunks_exact(self.dim)
    }

    /// `m <- alpha * m + (1 - alpha) * f`, then re-normalized when the bank
    /// was built with normalization on.
    pub fn ema_update(&mut self, cluster: usize, f: &[f64]) -> Result<()> {
        if cluster >= self.num_clusters {
            return Err(CpcError::ClusterOutOfRange {
                cluster,
                clusters: self.num_clusters,
            });
        }
        if f.len() != self.dim {
            return Err(CpcError::DimensionMismatch {
                expected: self.dim,
                found: f.len(),
            });
        }
        let a = self.alpha;
        // A frozen bank stays bit-identical, signed zeros included.
        if a == 1.0 {
            return Ok(());
        }
        let d = self.dim;
        let m = &mut self.centers[cluster * d..(cluster + 1) * d];
        for (mv, &fv) in m.iter_mut().zip(f) {
            // Rounding can land an ulp outside the segment; clamp it back.
            let blend = a * *mv + (1.0 - a) * fv;
            *mv = blend.clamp(mv.min(fv), mv.max(fv));
        }
        if self.normalize {
            normalize_in_place(m);
        }
        Ok(())
    }

    /// Temperature-scaled inner products `m_l . f / tau` for every center.
    pub fn logits(&self, f: &[f64], tau: f64) -> Result<Vec<f64>> {
        if tau.is_nan() || tau <= 0.0 {
            return Err(CpcError::invalid("tau", format!("must be > 0, got {tau}")));
        }
        if f.len() != self.dim {
            return Err(CpcError::DimensionMismatch {
                expected: self.dim,
                found: f.len(),
            });
        }
        Ok(self.centers().map(|m| dot(m, f) / tau).collect())
    }

    pub fn to_matrix(&self) -> FeatureMatrix {
        FeatureMatrix::new(self.num_clusters, self.dim, self.centers.clone())
            .expect("bank entries are finite")
    }

    /// Writes the centers as an embedding file without metadata.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        save_embeddings(path, &self.to_matrix(), None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbscan::relabel_compact;
    use crate::embedding::norm;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn bank_of(rows: &[[f64; 2]], labels: &[Option<u8>], alpha: f64, normalize: bool) -> ClusterBank {
        let f = FeatureMatrix::from_rows(rows).unwrap();
        ClusterBank::init(&f, &relabel_compact(labels), alpha, normalize).unwrap()
    }

    #[test]
    fn two_point_mean() {
        let rows = [[1.0, 0.0], [0.0, 1.0]];
        let raw = bank_of(&rows, &[Some(0), Some(0)], 0.2, false);
        assert_eq!(raw.center(0), &[0.5, 0.5]);
        let unit = bank_of(&rows, &[Some(0), Some(0)], 0.2, true);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((unit.center(0)[0] - h).abs() < 1e-12);
        assert!((unit.center(0)[1] - h).abs() < 1e-12);
    }

    #[test]
    fn singleton_and_noise() {
        let b = bank_of(&[[3.0, -1.0], [100.0, 100.0]], &[Some(4), None], 0.2, false);
        assert_eq!(b.num_clusters(), 1);
        assert_eq!(b.center(0), &[3.0, -1.0]);
    }

    #[test]
    fn nothing_clustered() {
        let f = FeatureMatrix::from_rows(&[[1.0, 0.0]]).unwrap();
        let err = ClusterBank::init(&f, &relabel_compact::<u8>(&[None]), 0.2, true);
        assert!(matches!(err, Err(CpcError::NothingClustered)));
    }

    #[test]
    fn mean_matches_naive_accumulation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let raw: Vec<Option<u8>> = (0..20).map(|_| Some(rng.random_range(0..3))).collect();
        let labels = relabel_compact(&raw);
        let bank = ClusterBank::init(&FeatureMatrix::from_rows(&rows).unwrap(), &labels, 0.2, false)
            .unwrap();
        for c in 0..labels.num_clusters() {
            let members: Vec<&Vec<f64>> = rows
                .iter()
                .zip(labels.labels())
                .filter(|(_, l)| **l == Some(c))
                .map(|(r, _)| r)
                .collect();
            for k in 0..5 {
                let mean = members.iter().map(|r| r[k]).sum::<f64>() / members.len() as f64;
                assert!((bank.center(c)[k] - mean).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ema_examples() {
        let mut b = bank_of(&[[1.0, 0.0]], &[Some(0)], 0.2, false);
        b.ema_update(0, &[0.0, 1.0]).unwrap();
        assert!((b.center(0)[0] - 0.2).abs() < 1e-15);
        assert!((b.center(0)[1] - 0.8).abs() < 1e-15);

        let mut keep = bank_of(&[[1.0, 0.0]], &[Some(0)], 1.0, false);
        keep.ema_update(0, &[-7.0, 9.0]).unwrap();
        assert_eq!(keep.center(0), &[1.0, 0.0]);

        let mut replace = bank_of(&[[1.0, 0.0]], &[Some(0)], 0.0, false);
        replace.ema_update(0, &[-7.0, 9.0]).unwrap();
        assert_eq!(replace.center(0), &[-7.0, 9.0]);

        assert!(matches!(
            b.ema_update(1, &[0.0, 1.0]),
            Err(CpcError::ClusterOutOfRange { cluster: 1, clusters: 1 })
        ));
    }

    #[test]
    fn logits_examples() {
        let b = bank_of(&[[1.0, 0.0], [0.0, 1.0]], &[Some(0), Some(1)], 0.2, true);
        let z = b.logits(&[1.0, 0.0], 0.05).unwrap();
        assert!((z[0] - 20.0).abs() < 1e-12);
        assert_eq!(z[1], 0.0);

        let b3 = ClusterBank::init(
            &FeatureMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap(),
            &relabel_compact(&[Some(0), Some(1)]),
            0.2,
            true,
        )
        .unwrap();
        assert_eq!(b3.logits(&[0.0, 0.0, 1.0], 1.0).unwrap(), vec![0.0, 0.0]);
        assert!(b3.logits(&[0.0, 0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn logits_match_naive_dot_product() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..7).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels = relabel_compact(&[Some(0), Some(1), Some(2), Some(3), Some(4), Some(5)]);
        let bank = ClusterBank::init(&FeatureMatrix::from_rows(&rows).unwrap(), &labels, 0.2, false)
            .unwrap();
        let f: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z = bank.logits(&f, 0.3).unwrap();
        for (c, row) in rows.iter().enumerate() {
            let mut s = 0.0;
            for k in 0..7 {
                s += row[k] * f[k];
            }
            assert!((z[c] - s / 0.3).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn ema_is_convex_and_keeps_unit_norm(
            alpha in 0.0f64..=1.0,
            start in prop::collection::vec(-1.0f64..1.0, 4),
            stream in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..20),
        ) {
            prop_assume!(norm(&start) > 1e-3);
            let f = FeatureMatrix::new(1, 4, start.clone()).unwrap();
            let one = relabel_compact(&[Some(0u8)]);
            let mut raw = ClusterBank::init(&f, &one, alpha, false).unwrap();
            let mut unit = ClusterBank::init(&f, &one, alpha, true).unwrap();
            for x in &stream {
                let before = raw.center(0).to_vec();
                raw.ema_update(0, x).unwrap();
                for k in 0..4 {
                    let (lo, hi) = (before[k].min(x[k]), before[k].max(x[k]));
                    prop_assert!(raw.center(0)[k] >= lo - 1e-12 && raw.center(0)[k] <= hi + 1e-12);
                }
                unit.ema_update(0, x).unwrap();
                let n = norm(unit.center(0));
                // A zero EMA result cannot be normalized and is left as is.
                prop_assert!((n - 1.0).abs() < 1e-6 || n < 1e-12);
            }
        }

        #[test]
        fn alpha_one_freezes_bank(stream in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 0..10)) {
            let mut b = bank_of(&[[0.6, 0.8], [1.0, 0.0]], &[Some(0), Some(1)], 1.0, true);
            let before = b.clone();
            for (i, x) in stream.iter().enumerate() {
                b.ema_update(i % 2, x).unwrap();
            }
            prop_assert_eq!(b, before);
        }
    }
}
