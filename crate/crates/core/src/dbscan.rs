//! Density-based clustering producing pseudo labels and a noise set.

use rayon::prelude::*;
use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use crate::embedding::DistanceMatrix;
use crate::error::{CpcError, Result};

/// DBSCAN parameters. `eps` is the radius the curriculum relaxes; `min_pts`
/// stays fixed for a run.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl ClusterParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self> {
        let p = Self { eps, min_pts };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(CpcError::invalid("eps", format!("must be > 0, got {}", self.eps)));
        }
        if self.min_pts < 1 {
            return Err(CpcError::invalid("min_pts", "must be >= 1"));
        }
        Ok(())
    }
}

/// Per-sample cluster ids (`None` is noise) with contiguous ids `0..C`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PseudoLabeling {
    labels: Vec<Option<usize>>,
    num_clusters: usize,
}

impl PseudoLabeling {
    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    /// Number of samples assigned to some cluster.
    pub fn num_clustered(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters];
        for c in self.labels.iter().flatten() {
            sizes[*c] += 1;
        }
        sizes
    }

    pub fn clustered_indices(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i].is_some())
            .collect()
    }

    /// `index,label` lines with noise written as -1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,label\n");
        for (i, l) in self.labels.iter().enumerate() {
            let v = l.map_or(-1, |c| c as i64);
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

/// Remaps arbitrary cluster keys to `0..C` in order of first appearance.
pub fn relabel_compact<L: Copy + Eq + Hash>(raw: &[Option<L>]) -> PseudoLabeling {
    let mut ids: HashMap<L, usize> = HashMap::new();
    let labels = raw
        .iter()
        .map(|l| {
            l.map(|key| {
                let next = ids.len();
                *ids.entry(key).or_insert(next)
            })
        })
        .collect();
    PseudoLabeling {
        labels,
        num_clusters: ids.len(),
    }
}

/// Indices within `eps` of `i`, itself included, in ascending order.
fn region(dist: &DistanceMatrix, i: usize, eps: f64) -> Vec<usize> {
    dist.row(i)
        .iter()
        .enumerate()
        .filter(|(_, &d)| d <= eps)
        .map(|(j, _)| j)
        .collect()
}

/// Points whose `eps`-neighbourhood (self included) holds at least `min_pts`
/// points.
pub fn core_points(dist: &DistanceMatrix, params: &ClusterParams) -> Vec<bool> {
    (0..dist.len())
        .into_par_iter()
        .map(|i| dist.row(i).iter().filter(|&&d| d <= params.eps).count() >= params.min_pts)
        .collect()
}

/// Classical DBSCAN over a precomputed distance matrix.
///
/// Clusters are seeded from core points in index order and expanded
/// breadth-first, so a border point reachable from several clusters joins
/// the one with the lowest-index core point. The result depends only on the
/// input order.
pub fn dbscan(dist: &DistanceMatrix, params: &ClusterParams) -> Result<PseudoLabeling> {
    params.validate()?;
    let n = dist.len();
    let core = core_points(dist, params);
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut num_clusters = 0;
    let mut queue = VecDeque::new();

    for seed in 0..n {
        if labels[seed].is_some() || !core[seed] {
            continue;
        }
        let c = num_clusters;
        num_clusters += 1;
        labels[seed] = Some(c);
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            for q in region(dist, p, params.eps) {
                if labels[q].is_none() {
                    labels[q] = Some(c);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
    }

    Ok(PseudoLabeling {
        labels,
        num_clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{pairwise_distances, FeatureMatrix};

    fn dist_of(points: &[[f64; 2]]) -> DistanceMatrix {
        pairwise_distances(&FeatureMatrix::from_rows(points).unwrap())
    }

    #[test]
    fn two_separated_blobs() {
        let mut pts = Vec::new();
        for k in 0..5 {
            pts.push([0.02 * k as f64, 0.0]);
        }
        for k in 0..5 {
            pts.push([10.0 + 0.02 * k as f64, 0.0]);
        }
        let l = dbscan(&dist_of(&pts), &ClusterParams::new(0.5, 3).unwrap()).unwrap();
        assert_eq!(l.num_clusters(), 2);
        assert_eq!(l.num_clustered(), 10);
        assert!(l.labels()[..5].iter().all(|&x| x == Some(0)));
        assert!(l.labels()[5..].iter().all(|&x| x == Some(1)));
    }

    #[test]
    fn isolated_point_is_noise() {
        let pts = [[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0]];
        let l = dbscan(&dist_of(&pts), &ClusterParams::new(0.5, 2).unwrap()).unwrap();
        assert_eq!(l.get(3), None);
        assert_eq!(l.num_clusters(), 1);
    }

    #[test]
    fn neighbour_count_includes_self() {
        let pts = [[0.0, 0.0], [0.3, 0.0]];
        let l = dbscan(&dist_of(&pts), &ClusterParams::new(0.5, 2).unwrap()).unwrap();
        assert_eq!(l.num_clusters(), 1);
        let l = dbscan(&dist_of(&pts), &ClusterParams::new(0.5, 3).unwrap()).unwrap();
        assert_eq!(l.num_clusters(), 0);
        let single = dbscan(&dist_of(&[[0.0, 0.0]]), &ClusterParams::new(0.1, 1).unwrap()).unwrap();
        assert_eq!(single.labels(), &[Some(0)]);
    }

    #[test]
    fn border_tie_goes_to_lowest_core() {
        // 0..=3 and 5..=8 are dense; 4 is within eps of 3 and 5 only.
        let pts = [
            [0.0, 0.0],
            [0.05, 0.0],
            [0.1, 0.0],
            [0.15, 0.0],
            [0.6, 0.0],
            [1.05, 0.0],
            [1.1, 0.0],
            [1.15, 0.0],
            [1.2, 0.0],
        ];
        let params = ClusterParams::new(0.46, 4).unwrap();
        let dist = dist_of(&pts);
        assert!(!core_points(&dist, &params)[4]);
        let l = dbscan(&dist, &params).unwrap();
        assert_eq!(l.num_clusters(), 2);
        assert_eq!(l.get(4), Some(0));
        assert_eq!(l.get(5), Some(1));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ClusterParams::new(0.0, 3).is_err());
        assert!(ClusterParams::new(0.5, 0).is_err());
        assert!(ClusterParams::new(f64::NAN, 3).is_err());
    }

    #[test]
    fn relabel_examples() {
        let l = relabel_compact(&[Some(5), Some(5), Some(9), None]);
        assert_eq!(l.labels(), &[Some(0), Some(0), Some(1), None]);
        assert_eq!(l.num_clusters(), 2);
        assert_eq!(l.num_clustered(), 3);

        let empty = relabel_compact::<i32>(&[None, None]);
        assert_eq!(empty.num_clusters(), 0);
        assert_eq!(empty.num_clustered(), 0);
    }

    #[test]
    fn csv_export_marks_noise() {
        let l = relabel_compact(&[Some('a'), None]);
        assert_eq!(l.to_csv(), "index,label\n0,0\n1,-1\n");
    }
}
