//! Embedding storage: the sample feature matrix, per-sample ground-truth
//! metadata, normalization and pairwise Euclidean distances.

mod io;

use rayon::prelude::*;
use std::collections::HashMap;

use crate::error::{CpcError, Result};

pub use io::{load_csv, load_embeddings, save_embeddings, write_csv};

/// Row-major `n × d` matrix of finite embedding coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(CpcError::EmptyDataset);
        }
        if d == 0 {
            return Err(CpcError::invalid("d", "feature dimension must be at least 1"));
        }
        if data.len() != n * d {
            return Err(CpcError::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(CpcError::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(CpcError::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), d, data)
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Copies the given rows, in order, into a new matrix.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.d, data)
    }
}

/// Ground truth for one sample. Never shown to the training loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SampleRecord {
    pub identity: u32,
    pub clothes: u32,
    pub camera: u32,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleMeta {
    pub records: Vec<SampleRecord>,
}

impl SampleMeta {
    pub fn new(records: Vec<SampleRecord>) -> Result<Self> {
        let meta = Self { records };
        meta.validate()?;
        Ok(meta)
    }

    /// Checks that every clothes id belongs to exactly one identity.
    pub fn validate(&self) -> Result<()> {
        let mut owner: HashMap<u32, u32> = HashMap::new();
        for r in &self.records {
            match owner.insert(r.clothes, r.identity) {
                Some(prev) if prev != r.identity => {
                    return Err(CpcError::invalid(
                        "meta",
                        format!(
                            "clothes id {} shared by identities {} and {}",
                            r.clothes, prev, r.identity
                        ),
                    ));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn identities(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.identity).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i]).collect(),
        }
    }
}

/// Symmetric `n × n` Euclidean distance matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    dist: Vec<f64>,
    n: usize,
}

impl DistanceMatrix {
    /// Wraps a precomputed matrix after checking symmetry, the zero diagonal
    /// and non-negativity.
    pub fn new(n: usize, dist: Vec<f64>) -> Result<Self> {
        if dist.len() != n * n {
            return Err(CpcError::DimensionMismatch {
                expected: n * n,
                found: dist.len(),
            });
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(CpcError::invalid("dist", format!("nonzero diagonal at {i}")));
            }
            for j in 0..n {
                let v = dist[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(CpcError::NonFinite { row: i, col: j });
                }
                if v != dist[j * n + i] {
                    return Err(CpcError::invalid(
                        "dist",
                        format!("asymmetric entry ({i}, {j})"),
                    ));
                }
            }
        }
        Ok(Self { dist, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scales `v` to unit norm in place. Returns the original norm, or `None`
/// (leaving `v` untouched) when the norm is zero.
pub fn normalize_in_place(v: &mut [f64]) -> Option<f64> {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= n);
    Some(n)
}

pub fn l2_normalize(f: &FeatureMatrix) -> Result<FeatureMatrix> {
    let mut data = f.data.clone();
    for (i, row) in data.chunks_exact_mut(f.d).enumerate() {
        normalize_in_place(row).ok_or(CpcError::ZeroNorm(i))?;
    }
    FeatureMatrix::new(f.n, f.d, data)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// All-pairs Euclidean distances. Rows are computed in parallel; each entry
/// is a fixed-order sum so the result does not depend on the thread count.
pub fn pairwise_distances(f: &FeatureMatrix) -> DistanceMatrix {
    let n = f.n;
    let mut dist = vec![0.0; n * n];
    dist.par_chunks_mut(n).enumerate().for_each(|(i, out)| {
        let a = f.row(i);
        for (j, slot) in out.iter_mut().enumerate() {
            if i != j {
                *slot = euclidean(a, f.row(j));
            }
        }
    });
    DistanceMatrix { dist, n }
}
