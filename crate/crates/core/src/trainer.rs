//! The epoch loop: extract features, cluster at the current radius, rebuild
//! the center bank, train the encoder against the bank with per-sample EMA
//! updates, then let the curriculum decide whether to relax the radius.

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;

use crate::config::parse_value;
use crate::curriculum::{relaxing_index, scheduler_delta, CurriculumState, RiVariant};
use crate::dbscan::{dbscan, ClusterParams, PseudoLabeling};
use crate::embedding::{pairwise_distances, FeatureMatrix};
use crate::encoder::{extract_features, loss_gradient, EncoderParams, Optimizer, OptimizerKind};
use crate::error::{CpcError, Result};
use crate::memory_bank::ClusterBank;
use crate::seeding::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampler {
    /// Uniform shuffle of the clustered samples.
    #[default]
    Uniform,
    /// Round-robin over pseudo-label groups, each shuffled.
    Balanced,
}

impl std::str::FromStr for Sampler {
    type Err = CpcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Sampler::Uniform),
            "balanced" => Ok(Sampler::Balanced),
            other => Err(CpcError::invalid("sampler", format!("unknown `{other}`"))),
        }
    }
}

impl Sampler {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sampler::Uniform => "uniform",
            Sampler::Balanced => "balanced",
        }
    }
}

/// Training hyperparameters. Defaults follow the published recipe where it
/// gives one (50 epochs, batch 128, lr 3.5e-4 decayed 10x every 20 epochs,
/// tau 0.05, alpha 0.2, threshold 0.8, step 0.01); the remaining values are
/// desk-scale choices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub tau: f64,
    pub alpha: f64,
    pub threshold: f64,
    pub step: f64,
    pub eps0: f64,
    pub min_pts: usize,
    pub seed: u64,
    /// Encoder output dimension.
    pub feature_dim: usize,
    pub normalize: bool,
    pub ri_variant: RiVariant,
    pub optimizer: OptimizerKind,
    pub sampler: Sampler,
    /// When off the scheduler never fires and the radius stays at `eps0`.
    pub curriculum: bool,
    pub init_noise: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 128,
            learning_rate: 3.5e-4,
            lr_decay_every: 20,
            lr_decay_factor: 0.1,
            tau: 0.05,
            alpha: 0.2,
            threshold: 0.8,
            step: 0.01,
            eps0: 0.25,
            min_pts: 4,
            seed: 0,
            feature_dim: 16,
            normalize: true,
            ri_variant: RiVariant::Pearson,
            optimizer: OptimizerKind::Sgd,
            sampler: Sampler::Uniform,
            curriculum: true,
            init_noise: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ClusterParams::new(self.eps0, self.min_pts)?;
        let positive = [
            ("learning_rate", self.learning_rate),
            ("tau", self.tau),
            ("lr_decay_factor", self.lr_decay_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CpcError::invalid("config", format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(CpcError::invalid("alpha", format!("{} not in [0, 1]", self.alpha)));
        }
        if !(self.step >= 0.0 && self.step.is_finite()) {
            return Err(CpcError::invalid("step", "must be >= 0"));
        }
        if !(self.init_noise >= 0.0 && self.init_noise.is_finite()) {
            return Err(CpcError::invalid("init_noise", "must be >= 0"));
        }
        if !self.threshold.is_finite() {
            return Err(CpcError::invalid("threshold", "must be finite"));
        }
        if self.batch_size == 0 || self.lr_decay_every == 0 || self.feature_dim == 0 {
            return Err(CpcError::invalid(
                "config",
                "batch_size, lr_decay_every and feature_dim must be positive",
            ));
        }
        Ok(())
    }

    /// Learning rate for a zero-based epoch index.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let decays = (epoch / self.lr_decay_every) as i32;
        self.learning_rate * self.lr_decay_factor.powi(decays)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "epochs" => self.epochs = parse_value("epochs", value)?,
            "batch_size" => self.batch_size = parse_value("batch_size", value)?,
            "learning_rate" => self.learning_rate = parse_value("learning_rate", value)?,
            "lr_decay_every" => self.lr_decay_every = parse_value("lr_decay_every", value)?,
            "lr_decay_factor" => self.lr_decay_factor = parse_value("lr_decay_factor", value)?,
            "tau" => self.tau = parse_value("tau", value)?,
            "alpha" => self.alpha = parse_value("alpha", value)?,
            "threshold" => self.threshold = parse_value("threshold", value)?,
            "step" => self.step = parse_value("step", value)?,
            "eps0" => self.eps0 = parse_value("eps0", value)?,
            "min_pts" => self.min_pts = parse_value("min_pts", value)?,
            "seed" => self.seed = parse_value("seed", value)?,
            "feature_dim" => self.feature_dim = parse_value("feature_dim", value)?,
            "normalize" => self.normalize = parse_value("normalize", value)?,
            "ri_variant" => self.ri_variant = value.parse()?,
            "optimizer" => self.optimizer = value.parse()?,
            "sampler" => self.sampler = value.parse()?,
            "curriculum" => self.curriculum = parse_value("curriculum", value)?,
            "init_noise" => self.init_noise = parse_value("init_noise", value)?,
            other => {
                return Err(CpcError::invalid("config", format!("unknown key `{other}`")));
            }
        }
        Ok(())
    }

    /// Every key with its resolved value; floats use their shortest
    /// round-trip representation.
    pub fn entries(&self) -> Vec<(String, String)> {
        let f = |v: f64| format!("{v:?}");
        vec![
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("learning_rate", f(self.learning_rate)),
            ("lr_decay_every", self.lr_decay_every.to_string()),
            ("lr_decay_factor", f(self.lr_decay_factor)),
            ("tau", f(self.tau)),
            ("alpha", f(self.alpha)),
            ("threshold", f(self.threshold)),
            ("step", f(self.step)),
            ("eps0", f(self.eps0)),
            ("min_pts", self.min_pts.to_string()),
            ("seed", self.seed.to_string()),
            ("feature_dim", self.feature_dim.to_string()),
            ("normalize", self.normalize.to_string()),
            ("ri_variant", self.ri_variant.as_str().to_string()),
            ("optimizer", self.optimizer.as_str().to_string()),
            ("sampler", self.sampler.as_str().to_string()),
            ("curriculum", self.curriculum.to_string()),
            ("init_noise", f(self.init_noise)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn apply(&mut self, entries: &[(String, String)]) -> Result<()> {
        entries.iter().try_for_each(|(k, v)| self.set(k, v))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub encoder: EncoderParams,
    pub state: CurriculumState,
    /// Clustering of the final features at the final radius.
    pub labels: PseudoLabeling,
    /// Pseudo labels used during each epoch.
    pub epoch_labels: Vec<PseudoLabeling>,
    /// Final encoder applied to the input.
    pub features: FeatureMatrix,
}

pub fn cluster_features(f: &FeatureMatrix, params: &ClusterParams) -> Result<PseudoLabeling> {
    dbscan(&pairwise_distances(f), params)
}

fn batch_order<R: Rng>(labels: &PseudoLabeling, sampler: Sampler, rng: &mut R) -> Vec<usize> {
    match sampler {
        Sampler::Uniform => {
            let mut idx = labels.clustered_indices();
            idx.shuffle(rng);
            idx
        }
        Sampler::Balanced => {
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, l) in labels.labels().iter().enumerate() {
                if let Some(c) = l {
                    groups.entry(*c).or_default().push(i);
                }
            }
            let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
            groups.shuffle(rng);
            groups.iter_mut().for_each(|g| g.shuffle(rng));
            let longest = groups.iter().map(Vec::len).max().unwrap_or(0);
            (0..longest)
                .flat_map(|k| groups.iter().filter_map(move |g| g.get(k).copied()))
                .collect()
        }
    }
}

/// Runs the full clustering-and-training loop with the curriculum enabled
/// as configured.
pub fn run_cpc(raw: &FeatureMatrix, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if raw.rows() < config.min_pts {
        return Err(CpcError::invalid(
            "min_pts",
            format!("{} samples cannot satisfy min_pts = {}", raw.rows(), config.min_pts),
        ));
    }

    let mut init_rng = stream_rng(config.seed, Stream::Init);
    let mut shuffle_rng = stream_rng(config.seed, Stream::Shuffle);
    let mut encoder =
        EncoderParams::near_identity(raw.dim(), config.feature_dim, config.init_noise, &mut init_rng);
    let mut optimizer = Optimizer::new(config.optimizer, encoder.num_params());
    let mut state = CurriculumState::new(
        ClusterParams::new(config.eps0, config.min_pts)?,
        config.threshold,
        config.step,
    )?;
    let mut epoch_labels = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let features = extract_features(&encoder, raw, config.normalize)?;
        let labels = cluster_features(&features, &state.params())?;

        if labels.num_clustered() == 0 {
            warn!(
                "epoch {epoch}: nothing clustered at eps {:.4}; relaxing radius and skipping training",
                state.params().eps
            );
            state.update_psi(epoch, None, u8::from(config.curriculum))?;
            epoch_labels.push(labels);
            continue;
        }

        let mut bank = ClusterBank::init(&features, &labels, config.alpha, config.normalize)?;
        let ri = relaxing_index(&features, &labels, &bank, config.ri_variant)?;

        let lr = config.lr_at(epoch);
        let order = batch_order(&labels, config.sampler, &mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad = EncoderParams::zeros(encoder.d_in(), encoder.d_out());
            let mut feats = Vec::with_capacity(batch.len());
            for &i in batch {
                let c = labels.get(i).expect("batches hold clustered samples only");
                let s = loss_gradient(&encoder, raw.row(i), c, &bank, config.tau, config.normalize)?;
                epoch_loss += s.loss;
                for (acc, g) in grad.iter_mut().zip(s.grad.iter()) {
                    *acc += g;
                }
                feats.push((c, s.feature));
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            optimizer.step(&mut encoder, &grad, lr);
            for (c, f) in &feats {
                bank.ema_update(*c, f)?;
            }
        }

        let delta = if config.curriculum {
            scheduler_delta(ri, config.threshold)
        } else {
            0
        };
        state.update_psi(epoch, Some(ri), delta)?;
        debug!(
            "epoch {epoch}: clusters {} clustered {}/{} loss {:.4} ri {ri:.4} delta {delta} eps {:.4}",
            labels.num_clusters(),
            labels.num_clustered(),
            labels.len(),
            epoch_loss / labels.num_clustered() as f64,
            state.params().eps
        );
        epoch_labels.push(labels);
    }

    let features = extract_features(&encoder, raw, config.normalize)?;
    let labels = cluster_features(&features, &state.params())?;
    Ok(TrainOutcome {
        encoder,
        state,
        labels,
        epoch_labels,
        features,
    })
}

/// The same loop with the curriculum disabled: the radius stays at `eps0`.
pub fn run_baseline(raw: &FeatureMatrix, config: &TrainConfig) -> Result<TrainOutcome> {
    run_cpc(raw, &baseline_config(config))
}

pub fn baseline_config(config: &TrainConfig) -> TrainConfig {
    TrainConfig {
        curriculum: false,
        step: 0.0,
        ..config.clone()
    }
}
