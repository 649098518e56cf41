//! Clustering-confidence curriculum.
//!
//! After each re-clustering the mean correlation between clustered samples
//! and their cluster centers (the relaxing index) is compared against a
//! threshold. When it exceeds the threshold the DBSCAN radius grows by a
//! fixed step, letting the next epoch merge looser groups.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::dbscan::{ClusterParams, PseudoLabeling};
use crate::embedding::{dot, norm, FeatureMatrix};
use crate::error::{CpcError, Result};
use crate::memory_bank::ClusterBank;

/// Which sample-to-center similarity feeds the relaxing index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiVariant {
    /// Pearson correlation across feature coordinates.
    #[default]
    Pearson,
    /// Covariance over the product of the sums of squared deviations, with
    /// no square roots. Unbounded; kept for comparison runs only.
    Raw,
    /// Plain cosine similarity without mean removal.
    Cosine,
}

impl RiVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            RiVariant::Pearson => "pearson",
            RiVariant::Raw => "raw",
            RiVariant::Cosine => "cosine",
        }
    }
}

impl FromStr for RiVariant {
    type Err = CpcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pearson" => Ok(RiVariant::Pearson),
            "raw" => Ok(RiVariant::Raw),
            "cosine" => Ok(RiVariant::Cosine),
            other => Err(CpcError::invalid(
                "ri_variant",
                format!("`{other}` is not one of pearson, raw, cosine"),
            )),
        }
    }
}

fn deviations(v: &[f64]) -> (Vec<f64>, f64) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let dev: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let ss = dev.iter().map(|x| x * x).sum();
    (dev, ss)
}

/// Pearson correlation between a feature row and a center row.
pub fn center_similarity(f: &[f64], m: &[f64]) -> Result<f64> {
    similarity(RiVariant::Pearson, f, m)
}

pub fn similarity(variant: RiVariant, f: &[f64], m: &[f64]) -> Result<f64> {
    if f.len() != m.len() {
        return Err(CpcError::DimensionMismatch {
            expected: f.len(),
            found: m.len(),
        });
    }
    if variant == RiVariant::Cosine {
        let denom = norm(f) * norm(m);
        if denom == 0.0 {
            return Err(CpcError::DegenerateFeature);
        }
        return Ok((dot(f, m) / denom).clamp(-1.0, 1.0));
    }
    if f.len() < 2 {
        return Err(CpcError::invalid("d", "correlation needs at least 2 coordinates"));
    }
    let (df, ssf) = deviations(f);
    let (dm, ssm) = deviations(m);
    if ssf == 0.0 || ssm == 0.0 {
        return Err(CpcError::DegenerateFeature);
    }
    let cov = dot(&df, &dm);
    Ok(match variant {
        RiVariant::Raw => cov / (ssf * ssm),
        _ => (cov / (ssf.sqrt() * ssm.sqrt())).clamp(-1.0, 1.0),
    })
}

/// Mean similarity of every clustered sample to its own cluster center.
/// Noise samples are skipped. Summation runs in sample order.
pub fn relaxing_index(
    f: &FeatureMatrix,
    labels: &PseudoLabeling,
    bank: &ClusterBank,
    variant: RiVariant,
) -> Result<f64> {
    if labels.len() != f.rows() {
        return Err(CpcError::DimensionMismatch {
            expected: f.rows(),
            found: labels.len(),
        });
    }
    let mut sum = 0.0;
    let mut z = 0usize;
    for (row, label) in f.iter_rows().zip(labels.labels()) {
        if let Some(c) = *label {
            if c >= bank.num_clusters() {
                return Err(CpcError::ClusterOutOfRange {
                    cluster: c,
                    clusters: bank.num_clusters(),
                });
            }
            sum += similarity(variant, row, bank.center(c))?;
            z += 1;
        }
    }
    if z == 0 {
        return Err(CpcError::NoClusteredSamples);
    }
    Ok(sum / z as f64)
}

/// `1` when `ri` strictly exceeds the threshold, else `0`.
pub fn scheduler_delta(ri: f64, threshold: f64) -> u8 {
    u8::from(ri > threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// `None` when the epoch clustered nothing.
    pub ri: Option<f64>,
    pub delta: u8,
    /// Radius after this epoch's update.
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumState {
    psi: ClusterParams,
    eps0: f64,
    relaxations: u64,
    threshold: f64,
    step: f64,
    history: Vec<EpochRecord>,
}

impl CurriculumState {
    pub fn new(psi: ClusterParams, threshold: f64, step: f64) -> Result<Self> {
        psi.validate()?;
        if !threshold.is_finite() {
            return Err(CpcError::invalid("threshold", "must be finite"));
        }
        if !(step >= 0.0 && step.is_finite()) {
            return Err(CpcError::invalid("step", format!("must be >= 0, got {step}")));
        }
        Ok(Self {
            psi,
            eps0: psi.eps,
            relaxations: 0,
            threshold,
            step,
            history: Vec::new(),
        })
    }

    pub fn params(&self) -> ClusterParams {
        self.psi
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    /// Grows the radius by `step * delta` and records the epoch.
    ///
    /// The radius is kept as `eps0 + step * (number of relaxations)` so the
    /// trajectory carries no accumulated rounding.
    pub fn update_psi(&mut self, epoch: usize, ri: Option<f64>, delta: u8) -> Result<()> {
        if delta > 1 {
            return Err(CpcError::invalid("delta", format!("{delta} not in {{0, 1}}")));
        }
        if let Some(last) = self.history.last() {
            if epoch <= last.epoch {
                return Err(CpcError::invalid(
                    "epoch",
                    format!("{epoch} does not follow {}", last.epoch),
                ));
            }
        }
        self.relaxations += u64::from(delta);
        self.psi.eps = self.eps0 + self.step * self.relaxations as f64;
        self.history.push(EpochRecord {
            epoch,
            ri,
            delta,
            eps: self.psi.eps,
        });
        Ok(())
    }

    /// `epoch,ri,delta,eps`; an epoch without clustered samples leaves `ri`
    /// empty.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("epoch,ri,delta,eps\n");
        for r in &self.history {
            let ri = r.ri.map(|v| format!("{v:?}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{:?}", r.epoch, ri, r.delta, r.eps);
        }
        out
    }
}
