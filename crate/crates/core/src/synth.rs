//! Synthetic clothes-change embeddings with an identity → clothes → sample
//! hierarchy on the unit sphere.
//!
//! Identity centers are rejection-sampled to keep a minimum pairwise
//! distance. Each clothes sub-center is its identity center pushed
//! tangentially by `clothes_offset` and projected back to the sphere. Samples
//! add isotropic Gaussian noise with per-coordinate deviation `noise_sigma`
//! and are normalized.

use log::warn;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use std::collections::{BTreeMap, HashSet};

use crate::config::parse_value;
use crate::embedding::{dot, euclidean, normalize_in_place, FeatureMatrix, SampleMeta, SampleRecord};
use crate::error::{CpcError, Result};
use crate::seeding::{stream_rng, Stream};

const MAX_ATTEMPTS: usize = 10_000;
const SECONDS_PER_FRAME: u64 = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub num_identities: usize,
    pub clothes_per_identity: usize,
    pub samples_per_clothes: usize,
    pub dim: usize,
    /// Minimum distance between identity centers.
    pub identity_separation: f64,
    /// Distance of each clothes sub-center from its identity center, before
    /// projection to the sphere.
    pub clothes_offset: f64,
    pub noise_sigma: f64,
    pub cameras: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_identities: 20,
            clothes_per_identity: 3,
            samples_per_clothes: 25,
            dim: 16,
            identity_separation: 1.2,
            clothes_offset: 0.4,
            noise_sigma: 0.05,
            cameras: 4,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn num_samples(&self) -> usize {
        self.num_identities * self.clothes_per_identity * self.samples_per_clothes
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_identities == 0
            || self.clothes_per_identity == 0
            || self.samples_per_clothes == 0
            || self.cameras == 0
        {
            return Err(CpcError::invalid("synth", "counts must be positive"));
        }
        if self.dim < 2 {
            return Err(CpcError::invalid("dim", "must be at least 2"));
        }
        if !(self.noise_sigma >= 0.0
            && self.noise_sigma < self.clothes_offset
            && self.clothes_offset < self.identity_separation)
        {
            return Err(CpcError::invalid(
                "synth",
                format!(
                    "need 0 <= noise_sigma ({}) < clothes_offset ({}) < identity_separation ({})",
                    self.noise_sigma, self.clothes_offset, self.identity_separation
                ),
            ));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "num_identities" => self.num_identities = parse_value("num_identities", value)?,
            "clothes_per_identity" => {
                self.clothes_per_identity = parse_value("clothes_per_identity", value)?
            }
            "samples_per_clothes" => {
                self.samples_per_clothes = parse_value("samples_per_clothes", value)?
            }
            "dim" => self.dim = parse_value("dim", value)?,
            "identity_separation" => {
                self.identity_separation = parse_value("identity_separation", value)?
            }
            "clothes_offset" => self.clothes_offset = parse_value("clothes_offset", value)?,
            "noise_sigma" => self.noise_sigma = parse_value("noise_sigma", value)?,
            "cameras" => self.cameras = parse_value("cameras", value)?,
            "seed" => self.seed = parse_value("seed", value)?,
            other => return Err(CpcError::invalid("synth", format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn entries(&self) -> Vec<(String, String)> {
        vec![
            ("num_identities", self.num_identities.to_string()),
            ("clothes_per_identity", self.clothes_per_identity.to_string()),
            ("samples_per_clothes", self.samples_per_clothes.to_string()),
            ("dim", self.dim.to_string()),
            ("identity_separation", format!("{:?}", self.identity_separation)),
            ("clothes_offset", format!("{:?}", self.clothes_offset)),
            ("noise_sigma", format!("{:?}", self.noise_sigma)),
            ("cameras", self.cameras.to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

fn gaussian<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_gaussian<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian(rng, dim);
        if normalize_in_place(&mut v).is_some() {
            return v;
        }
    }
}

pub fn generate(config: &SynthConfig) -> Result<(FeatureMatrix, SampleMeta)> {
    config.validate()?;
    let d = config.dim;
    let mut rng = stream_rng(config.seed, Stream::Synth);

    let mut identities: Vec<Vec<f64>> = Vec::with_capacity(config.num_identities);
    for id in 0..config.num_identities {
        let mut accepted = None;
        for _ in 0..MAX_ATTEMPTS {
            let v = unit_gaussian(&mut rng, d);
            if identities
                .iter()
                .all(|c| euclidean(c, &v) >= config.identity_separation)
            {
                accepted = Some(v);
                break;
            }
        }
        let v = accepted.ok_or_else(|| {
            CpcError::Infeasible(format!(
                "could not place identity {id} at separation {} in dimension {d} after {MAX_ATTEMPTS} attempts",
                config.identity_separation
            ))
        })?;
        identities.push(v);
    }

    let noise_scale = config.noise_sigma;
    let mut data = Vec::with_capacity(config.num_samples() * d);
    let mut records = Vec::with_capacity(config.num_samples());
    let mut frame = vec![0u64; config.cameras];
    let mut index = 0usize;

    for (id, center) in identities.iter().enumerate() {
        for k in 0..config.clothes_per_identity {
            // Tangential push keeps the offset independent of the center.
            let mut dir = gaussian(&mut rng, d);
            let along = dot(&dir, center);
            dir.iter_mut().zip(center).for_each(|(g, c)| *g -= along * c);
            if normalize_in_place(&mut dir).is_none() {
                dir = unit_gaussian(&mut rng, d);
            }
            let mut sub: Vec<f64> = center
                .iter()
                .zip(&dir)
                .map(|(c, g)| c + config.clothes_offset * g)
                .collect();
            normalize_in_place(&mut sub);

            for _ in 0..config.samples_per_clothes {
                let noise = gaussian(&mut rng, d);
                let mut x: Vec<f64> = sub
                    .iter()
                    .zip(&noise)
                    .map(|(s, e)| s + noise_scale * e)
                    .collect();
                if normalize_in_place(&mut x).is_none() {
                    x = sub.clone();
                }
                data.extend_from_slice(&x);

                let camera = index % config.cameras;
                records.push(SampleRecord {
                    identity: id as u32,
                    clothes: (id * config.clothes_per_identity + k) as u32,
                    camera: camera as u32,
                    timestamp: frame[camera] * SECONDS_PER_FRAME,
                });
                frame[camera] += 1;
                index += 1;
            }
        }
    }

    let f = FeatureMatrix::new(records.len(), d, data)?;
    Ok((f, SampleMeta::new(records)?))
}

/// Disjoint query and gallery index sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub query: Vec<usize>,
    pub gallery: Vec<usize>,
}

/// Stratified split over `(identity, clothes, camera)` cells.
///
/// Every cell with two or more samples keeps at least one in the gallery,
/// so any query whose identity has other clothes seen by the same camera
/// finds a long-term positive. Per-cell query counts follow the running
/// rounded target, keeping the total within one of `ratio * n`. Identities
/// with a single sample go to the gallery only.
pub fn split_query_gallery(meta: &SampleMeta, ratio: f64, seed: u64) -> Result<Split> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CpcError::invalid("ratio", format!("{ratio} not in (0, 1)")));
    }
    let mut rng = stream_rng(seed, Stream::Split);
    let mut cells: BTreeMap<(u32, u32, u32), Vec<usize>> = BTreeMap::new();
    let mut per_identity: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, r) in meta.records.iter().enumerate() {
        cells.entry((r.identity, r.clothes, r.camera)).or_default().push(i);
        *per_identity.entry(r.identity).or_default() += 1;
    }
    for (id, count) in &per_identity {
        if *count == 1 {
            warn!("identity {id} has a single sample; placing it in the gallery only");
        }
    }

    let mut is_query = vec![false; meta.len()];
    let mut seen = 0usize;
    let mut assigned = 0usize;
    for members in cells.values_mut() {
        members.shuffle(&mut rng);
        seen += members.len();
        let target = (ratio * seen as f64).round() as usize;
        let cap = members.len().saturating_sub(1);
        let take = target.saturating_sub(assigned).min(cap);
        for &i in &members[..take] {
            is_query[i] = true;
        }
        assigned += take;
    }

    // Identities with several samples but no query yet donate one sample
    // from their largest cell that can spare it.
    let in_query: HashSet<u32> = (0..meta.len())
        .filter(|&i| is_query[i])
        .map(|i| meta.records[i].identity)
        .collect();
    for (id, count) in &per_identity {
        if *count < 2 || in_query.contains(id) {
            continue;
        }
        let donor = cells
            .iter()
            .filter(|((cid, _, _), m)| cid == id && m.len() >= 2)
            .max_by_key(|(_, m)| m.len())
            .or_else(|| cells.iter().find(|((cid, _, _), _)| cid == id));
        if let Some((_, members)) = donor {
            is_query[members[0]] = true;
        }
    }

    let query = (0..meta.len()).filter(|&i| is_query[i]).collect();
    let gallery = (0..meta.len()).filter(|&i| !is_query[i]).collect();
    Ok(Split { query, gallery })
}
