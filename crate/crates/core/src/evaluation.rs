//! Retrieval accuracy (CMC, mAP) under a standard or long-term protocol, and
//! pair-counting clustering quality against ground-truth identities.

use rayon::prelude::*;
use std::collections::HashMap;
use std::str::FromStr;

use crate::dbscan::PseudoLabeling;
use crate::embedding::{dot, norm, FeatureMatrix, SampleMeta, SampleRecord};
use crate::error::{CpcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    /// Cross-camera matching: same-identity entries from the query's camera
    /// (including the query itself) are dropped.
    Standard,
    /// A true match shares the query's camera but was captured at a
    /// different time in different clothes. Other same-identity entries are
    /// dropped.
    #[default]
    LongTerm,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Standard => "standard",
            Protocol::LongTerm => "long_term",
        }
    }
}

impl FromStr for Protocol {
    type Err = CpcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Protocol::Standard),
            "long_term" => Ok(Protocol::LongTerm),
            other => Err(CpcError::invalid(
                "protocol",
                format!("`{other}` is not one of standard, long_term"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relevance {
    Positive,
    Negative,
    Excluded,
}

/// How a gallery entry counts for a query.
pub fn relevance(protocol: Protocol, query: &SampleRecord, gallery: &SampleRecord) -> Relevance {
    if query.identity != gallery.identity {
        return Relevance::Negative;
    }
    match protocol {
        Protocol::Standard => {
            if query.camera == gallery.camera {
                Relevance::Excluded
            } else {
                Relevance::Positive
            }
        }
        Protocol::LongTerm => {
            if query.camera == gallery.camera
                && query.timestamp != gallery.timestamp
                && query.clothes != gallery.clothes
            {
                Relevance::Positive
            } else {
                Relevance::Excluded
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RetrievalResult {
    /// `cmc[k - 1]` is the fraction of valid queries with a positive in the
    /// top `k`.
    pub cmc: Vec<f64>,
    pub map: f64,
    pub num_valid_queries: usize,
    pub skipped_queries: usize,
}

impl RetrievalResult {
    /// Rank-`k` accuracy, 1-based.
    pub fn rank(&self, k: usize) -> f64 {
        self.cmc[k - 1]
    }
}

/// Relevance flags of the ranked, filtered gallery for one query, or `None`
/// when the query has no positive.
fn ranked_hits(
    q: &[f64],
    qrec: &SampleRecord,
    gf: &FeatureMatrix,
    gnorms: &[f64],
    gmeta: &SampleMeta,
    protocol: Protocol,
) -> Option<Vec<bool>> {
    let qn = norm(q);
    let mut scored: Vec<(f64, usize, bool)> = Vec::with_capacity(gf.rows());
    for (j, (g, grec)) in gf.iter_rows().zip(&gmeta.records).enumerate() {
        let hit = match relevance(protocol, qrec, grec) {
            Relevance::Excluded => continue,
            Relevance::Positive => true,
            Relevance::Negative => false,
        };
        let denom = qn * gnorms[j];
        let sim = if denom > 0.0 { dot(q, g) / denom } else { 0.0 };
        scored.push((sim, j, hit));
    }
    if !scored.iter().any(|s| s.2) {
        return None;
    }
    // partial_cmp keeps -0.0 and 0.0 tied; similarities are always finite.
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .expect("finite similarity")
            .then(a.1.cmp(&b.1))
    });
    Some(scored.into_iter().map(|s| s.2).collect())
}

/// Average precision over a ranked relevance list with at least one hit.
pub fn average_precision(hits: &[bool]) -> f64 {
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, &h) in hits.iter().enumerate() {
        if h {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    if found == 0 {
        0.0
    } else {
        sum / found as f64
    }
}

/// Ranks the gallery for every query by cosine similarity (ties by gallery
/// index) and reports CMC up to `max_rank` and mAP over queries with at
/// least one positive.
pub fn evaluate_retrieval(
    qf: &FeatureMatrix,
    qmeta: &SampleMeta,
    gf: &FeatureMatrix,
    gmeta: &SampleMeta,
    protocol: Protocol,
    max_rank: usize,
) -> Result<RetrievalResult> {
    if qf.dim() != gf.dim() {
        return Err(CpcError::DimensionMismatch {
            expected: qf.dim(),
            found: gf.dim(),
        });
    }
    if qmeta.len() != qf.rows() || gmeta.len() != gf.rows() {
        return Err(CpcError::MissingMeta);
    }
    if max_rank == 0 {
        return Err(CpcError::invalid("max_rank", "must be >= 1"));
    }
    let gnorms: Vec<f64> = gf.iter_rows().map(norm).collect();
    let per_query: Vec<Option<Vec<bool>>> = (0..qf.rows())
        .into_par_iter()
        .map(|i| ranked_hits(qf.row(i), &qmeta.records[i], gf, &gnorms, gmeta, protocol))
        .collect();

    let mut cmc = vec![0.0; max_rank];
    let mut ap_sum = 0.0;
    let mut valid = 0usize;
    for hits in per_query.iter().flatten() {
        valid += 1;
        ap_sum += average_precision(hits);
        let first = hits.iter().position(|&h| h).expect("valid query has a positive");
        for slot in cmc.iter_mut().skip(first) {
            *slot += 1.0;
        }
    }
    if valid > 0 {
        cmc.iter_mut().for_each(|v| *v /= valid as f64);
    }
    Ok(RetrievalResult {
        cmc,
        map: if valid > 0 { ap_sum / valid as f64 } else { 0.0 },
        num_valid_queries: valid,
        skipped_queries: qf.rows() - valid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClusteringQuality {
    pub pairwise_precision: f64,
    pub pairwise_recall: f64,
    pub pairwise_f1: f64,
    pub ari: f64,
    pub cluster_count: usize,
}

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

/// Pair-counting agreement between pseudo labels and ground-truth
/// identities. Noise samples are treated as singleton clusters.
pub fn clustering_quality(labels: &PseudoLabeling, meta: &SampleMeta) -> Result<ClusteringQuality> {
    if labels.len() != meta.len() {
        return Err(CpcError::DimensionMismatch {
            expected: meta.len(),
            found: labels.len(),
        });
    }
    let n = labels.len();
    let predicted: Vec<usize> = labels
        .labels()
        .iter()
        .enumerate()
        .map(|(i, l)| l.unwrap_or(labels.num_clusters() + i))
        .collect();

    let mut pred_sizes: HashMap<usize, u64> = HashMap::new();
    let mut true_sizes: HashMap<u32, u64> = HashMap::new();
    let mut cells: HashMap<(usize, u32), u64> = HashMap::new();
    for (p, r) in predicted.iter().zip(&meta.records) {
        *pred_sizes.entry(*p).or_default() += 1;
        *true_sizes.entry(r.identity).or_default() += 1;
        *cells.entry((*p, r.identity)).or_default() += 1;
    }
    let tp: f64 = cells.values().map(|&c| pairs(c)).sum();
    let pred_pairs: f64 = pred_sizes.values().map(|&c| pairs(c)).sum();
    let true_pairs: f64 = true_sizes.values().map(|&c| pairs(c)).sum();

    let precision = if pred_pairs > 0.0 { tp / pred_pairs } else { 1.0 };
    let recall = if true_pairs > 0.0 { tp / true_pairs } else { 1.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };

    let total = pairs(n as u64);
    let ari = if total == 0.0 {
        1.0
    } else {
        let expected = pred_pairs * true_pairs / total;
        let max_index = 0.5 * (pred_pairs + true_pairs);
        if max_index == expected {
            1.0
        } else {
            (tp - expected) / (max_index - expected)
        }
    };

    Ok(ClusteringQuality {
        pairwise_precision: precision,
        pairwise_recall: recall,
        pairwise_f1: f1,
        ari,
        cluster_count: labels.num_clusters(),
    })
}

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    pub cmc: Vec<f64>,
    pub map: f64,
    pub num_valid_queries: usize,
    pub skipped_queries: usize,
    pub pairwise_f1: f64,
    pub ari: f64,
    pub cluster_count: usize,
}

impl Metrics {
    pub fn new(retrieval: &RetrievalResult, quality: &ClusteringQuality) -> Self {
        Self {
            cmc: retrieval.cmc.clone(),
            map: retrieval.map,
            num_valid_queries: retrieval.num_valid_queries,
            skipped_queries: retrieval.skipped_queries,
            pairwise_f1: quality.pairwise_f1,
            ari: quality.ari,
            cluster_count: quality.cluster_count,
        }
    }
}
