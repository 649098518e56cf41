//! Brute-force reference implementations used by the integration tests.
//! Each one favours obviousness over speed.

#![allow(dead_code)]

use cpc::{ClusterBank, DistanceMatrix, EncoderParams, FeatureMatrix, PseudoLabeling, SampleRecord};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random points on a coarse integer grid so that distance ties, and hence
/// border points shared by two clusters, actually occur.
pub fn grid_points(rng: &mut ChaCha8Rng, n: usize, d: usize, side: i32) -> FeatureMatrix {
    let data = (0..n * d).map(|_| rng.random_range(0..side) as f64).collect();
    FeatureMatrix::new(n, d, data).unwrap()
}

pub fn gaussian_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let data = (0..n * d)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect();
    FeatureMatrix::new(n, d, data).unwrap()
}

/// Canonical form of a partition: labels renumbered in order of first
/// appearance, noise kept as `None`.
pub fn canonical(labels: &[Option<usize>]) -> Vec<Option<usize>> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            l.map(|c| {
                let next = map.len();
                *map.entry(c).or_insert(next)
            })
        })
        .collect()
}

/// DBSCAN by closure: core points are joined by Floyd-Warshall reachability
/// over the `dist <= eps` graph, and each border point goes to the adjacent
/// component whose smallest core index is lowest.
pub fn dbscan_oracle(dist: &DistanceMatrix, eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = dist.len();
    let near = |i: usize, j: usize| dist.get(i, j) <= eps;
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts)
        .collect();

    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            reach[i][j] = core[i] && core[j] && near(i, j);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    let root = |i: usize| (0..n).find(|&j| reach[i][j]).unwrap();

    (0..n)
        .map(|i| {
            if core[i] {
                Some(root(i))
            } else {
                (0..n).filter(|&j| core[j] && near(i, j)).map(root).min()
            }
        })
        .collect()
}

/// `true` when every cluster of `fine` lies inside a single cluster of
/// `coarse`, over points clustered in both.
pub fn refines(fine: &PseudoLabeling, coarse: &PseudoLabeling) -> bool {
    let mut image = std::collections::HashMap::new();
    for (a, b) in fine.labels().iter().zip(coarse.labels()) {
        if let (Some(a), Some(b)) = (a, b) {
            if *image.entry(*a).or_insert(*b) != *b {
                return false;
            }
        }
    }
    true
}

/// Two-pass Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    cov / (va.sqrt() * vb.sqrt())
}

pub fn relaxing_index_oracle(f: &FeatureMatrix, labels: &PseudoLabeling, bank: &ClusterBank) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for i in 0..f.rows() {
        if let Some(c) = labels.get(i) {
            total += pearson(f.row(i), bank.center(c));
            count += 1;
        }
    }
    total / count as f64
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na * nb > 0.0 {
        dot / (na * nb)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleProtocol {
    Standard,
    LongTerm,
}

/// `Some(true)` positive, `Some(false)` negative, `None` ignored.
fn judge(p: OracleProtocol, q: &SampleRecord, g: &SampleRecord) -> Option<bool> {
    if q.identity != g.identity {
        return Some(false);
    }
    match p {
        OracleProtocol::Standard => (q.camera != g.camera).then_some(true),
        OracleProtocol::LongTerm => {
            (q.camera == g.camera && q.timestamp != g.timestamp && q.clothes != g.clothes)
                .then_some(true)
        }
    }
}

pub struct RetrievalOracle {
    pub cmc: Vec<f64>,
    pub map: f64,
    pub valid: usize,
}

/// CMC and mAP from rank counting: the rank of gallery entry `j` is one plus
/// the number of kept entries that score higher, or score the same with a
/// smaller index. Nothing is sorted.
pub fn retrieval_oracle(
    qf: &FeatureMatrix,
    qm: &[SampleRecord],
    gf: &FeatureMatrix,
    gm: &[SampleRecord],
    protocol: OracleProtocol,
    max_rank: usize,
) -> RetrievalOracle {
    let mut cmc = vec![0.0; max_rank];
    let mut ap_sum = 0.0;
    let mut valid = 0;
    for i in 0..qf.rows() {
        let kept: Vec<(usize, f64, bool)> = (0..gf.rows())
            .filter_map(|j| judge(protocol, &qm[i], &gm[j]).map(|hit| (j, cosine(qf.row(i), gf.row(j)), hit)))
            .collect();
        let rank = |j: usize, s: f64| {
            1 + kept
                .iter()
                .filter(|&&(k, t, _)| t > s || (t == s && k < j))
                .count()
        };
        let mut pos_ranks: Vec<usize> = kept.iter().filter(|e| e.2).map(|e| rank(e.0, e.1)).collect();
        if pos_ranks.is_empty() {
            continue;
        }
        valid += 1;
        pos_ranks.sort_unstable();
        let ap: f64 = pos_ranks
            .iter()
            .enumerate()
            .map(|(k, &r)| (k + 1) as f64 / r as f64)
            .sum::<f64>()
            / pos_ranks.len() as f64;
        ap_sum += ap;
        for (k, slot) in cmc.iter_mut().enumerate() {
            if pos_ranks[0] <= k + 1 {
                *slot += 1.0;
            }
        }
    }
    if valid > 0 {
        cmc.iter_mut().for_each(|v| *v /= valid as f64);
    }
    RetrievalOracle {
        cmc,
        map: if valid > 0 { ap_sum / valid as f64 } else { 0.0 },
        valid,
    }
}

/// Pair counts `(tp, predicted, actual)` over all unordered pairs, noise
/// samples counted as singletons.
pub fn pair_counts(pred: &[Option<usize>], truth: &[u32]) -> (u64, u64, u64) {
    let n = pred.len();
    let (mut tp, mut predicted, mut actual) = (0, 0, 0);
    for i in 0..n {
        for j in i + 1..n {
            let same_pred = matches!((pred[i], pred[j]), (Some(a), Some(b)) if a == b);
            let same_true = truth[i] == truth[j];
            predicted += u64::from(same_pred);
            actual += u64::from(same_true);
            tp += u64::from(same_pred && same_true);
        }
    }
    (tp, predicted, actual)
}

/// Central differences of `loss` with respect to every encoder parameter.
pub fn numeric_gradient(
    params: &EncoderParams,
    h: f64,
    loss: impl Fn(&EncoderParams) -> f64,
) -> Vec<f64> {
    let n = params.iter().count();
    (0..n)
        .map(|k| {
            let mut plus = params.clone();
            let mut minus = params.clone();
            *plus.iter_mut().nth(k).unwrap() += h;
            *minus.iter_mut().nth(k).unwrap() -= h;
            (loss(&plus) - loss(&minus)) / (2.0 * h)
        })
        .collect()
}

/// Below this gradient norm central differences at `h = 1e-5` are mostly
/// roundoff (about `1e-16 / 1e-5` per entry), so the error is scaled by it
/// instead.
pub const GRADIENT_FLOOR: f64 = 1e-6;

/// `|a - b| / max(|a|, |b|, GRADIENT_FLOOR)` in the Euclidean norm.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(GRADIENT_FLOOR)
}
