//! Linear feature encoder, the temperature-scaled cluster contrastive loss
//! and its exact gradient with respect to the encoder parameters.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::embedding::{dot, norm, FeatureMatrix};
use crate::error::{CpcError, Result};
use crate::memory_bank::ClusterBank;

/// `f = W^T x + b` with `W` stored row-major as `d_in × d_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    d_in: usize,
    d_out: usize,
}

impl EncoderParams {
    pub fn new(d_in: usize, d_out: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(CpcError::invalid("encoder", "dimensions must be positive"));
        }
        if weight.len() != d_in * d_out {
            return Err(CpcError::DimensionMismatch {
                expected: d_in * d_out,
                found: weight.len(),
            });
        }
        if bias.len() != d_out {
            return Err(CpcError::DimensionMismatch {
                expected: d_out,
                found: bias.len(),
            });
        }
        if weight.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(CpcError::invalid("encoder", "non-finite parameter"));
        }
        Ok(Self {
            weight,
            bias,
            d_in,
            d_out,
        })
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Self {
            weight: vec![0.0; d_in * d_out],
            bias: vec![0.0; d_out],
            d_in,
            d_out,
        }
    }

    /// Identity on the leading `min(d_in, d_out)` block plus Gaussian jitter
    /// of standard deviation `noise`; zero bias.
    pub fn near_identity<R: Rng>(d_in: usize, d_out: usize, noise: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(d_in, d_out);
        for i in 0..d_in {
            for j in 0..d_out {
                let jitter: f64 = rng.sample(StandardNormal);
                p.weight[i * d_out + j] = f64::from(u8::from(i == j)) + noise * jitter;
            }
        }
        p
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    /// Weight then bias, as one flat slice-like iterator.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(&self.bias)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }

    /// Rows of `W` followed by `b` as a `(d_in + 1) × d_out` matrix.
    pub fn to_matrix(&self) -> FeatureMatrix {
        let mut data = self.weight.clone();
        data.extend_from_slice(&self.bias);
        FeatureMatrix::new(self.d_in + 1, self.d_out, data).expect("finite parameters")
    }

    pub fn from_matrix(m: &FeatureMatrix) -> Result<Self> {
        if m.rows() < 2 {
            return Err(CpcError::invalid("encoder", "needs weight rows and a bias row"));
        }
        let d_in = m.rows() - 1;
        let d_out = m.dim();
        let data = m.as_slice();
        Self::new(
            d_in,
            d_out,
            data[..d_in * d_out].to_vec(),
            data[d_in * d_out..].to_vec(),
        )
    }

    fn affine(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in {
            return Err(CpcError::DimensionMismatch {
                expected: self.d_in,
                found: x.len(),
            });
        }
        let mut f = self.bias.clone();
        for (xi, w_row) in x.iter().zip(self.weight.chunks_exact(self.d_out)) {
            for (fj, wij) in f.iter_mut().zip(w_row) {
                *fj += wij * xi;
            }
        }
        Ok(f)
    }
}

/// Encodes one input vector, optionally projecting onto the unit sphere.
pub fn encoder_forward(params: &EncoderParams, x: &[f64], normalize: bool) -> Result<Vec<f64>> {
    let mut f = params.affine(x)?;
    if normalize {
        let n = norm(&f);
        if n == 0.0 {
            return Err(CpcError::DegenerateFeature);
        }
        f.iter_mut().for_each(|v| *v /= n);
    }
    Ok(f)
}

/// Encodes every row of `raw`. Rows are independent, so the parallel map
/// is order-preserving and thread-count independent.
pub fn extract_features(
    params: &EncoderParams,
    raw: &FeatureMatrix,
    normalize: bool,
) -> Result<FeatureMatrix> {
    let rows: Vec<Result<Vec<f64>>> = (0..raw.rows())
        .into_par_iter()
        .map(|i| {
            encoder_forward(params, raw.row(i), normalize).map_err(|e| match e {
                CpcError::DegenerateFeature => CpcError::ZeroNorm(i),
                other => other,
            })
        })
        .collect();
    let mut data = Vec::with_capacity(raw.rows() * params.d_out);
    for r in rows {
        data.extend(r?);
    }
    FeatureMatrix::new(raw.rows(), params.d_out, data)
}

fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
    max + sum.ln()
}

/// Cross-entropy of the softmax over temperature-scaled center similarities
/// against the sample's pseudo label.
pub fn contrastive_loss(f: &[f64], label: usize, bank: &ClusterBank, tau: f64) -> Result<f64> {
    let mut z = bank.logits(f, tau)?;
    if label >= z.len() {
        return Err(CpcError::ClusterOutOfRange {
            cluster: label,
            clusters: z.len(),
        });
    }
    let target = z[label];
    let lse = softmax_in_place(&mut z);
    Ok((lse - target).max(0.0))
}

#[derive(Debug, Clone)]
pub struct SampleGradient {
    pub loss: f64,
    /// Gradient with the same layout as the encoder parameters.
    pub grad: EncoderParams,
    /// The encoded feature, as fed to the loss.
    pub feature: Vec<f64>,
}

/// Loss and exact parameter gradient for one sample. The bank is treated as
/// a constant.
pub fn loss_gradient(
    params: &EncoderParams,
    x: &[f64],
    label: usize,
    bank: &ClusterBank,
    tau: f64,
    normalize: bool,
) -> Result<SampleGradient> {
    let raw = params.affine(x)?;
    let (feature, scale) = if normalize {
        let n = norm(&raw);
        if n == 0.0 {
            return Err(CpcError::DegenerateFeature);
        }
        (raw.iter().map(|v| v / n).collect::<Vec<_>>(), n)
    } else {
        (raw, 1.0)
    };

    let mut p = bank.logits(&feature, tau)?;
    if label >= p.len() {
        return Err(CpcError::ClusterOutOfRange {
            cluster: label,
            clusters: p.len(),
        });
    }
    let target = p[label];
    let lse = softmax_in_place(&mut p);
    let loss = (lse - target).max(0.0);

    // dL/df = sum_l (p_l - [l == label]) m_l / tau
    p[label] -= 1.0;
    let d = params.d_out;
    let mut g = vec![0.0; d];
    for (pl, m) in p.iter().zip(bank.centers()) {
        for (gj, mj) in g.iter_mut().zip(m) {
            *gj += pl * mj;
        }
    }
    g.iter_mut().for_each(|v| *v /= tau);

    // Through f = u / |u|: dL/du = (g - f (f . g)) / |u|
    if normalize {
        let fg = dot(&feature, &g);
        for (gj, fj) in g.iter_mut().zip(&feature) {
            *gj = (*gj - fj * fg) / scale;
        }
    }

    let mut grad = EncoderParams::zeros(params.d_in, d);
    for (xi, row) in x.iter().zip(grad.weight.chunks_exact_mut(d)) {
        for (w, gj) in row.iter_mut().zip(&g) {
            *w = xi * gj;
        }
    }
    grad.bias = g;

    Ok(SampleGradient {
        loss,
        grad,
        feature,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = CpcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(CpcError::invalid("optimizer", format!("unknown `{other}`"))),
        }
    }
}

impl OptimizerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam {
        m: Vec<f64>,
        v: Vec<f64>,
        t: i32,
    },
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, num_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                m: vec![0.0; num_params],
                v: vec![0.0; num_params],
                t: 0,
            },
        }
    }

    pub fn step(&mut self, params: &mut EncoderParams, grad: &EncoderParams, lr: f64) {
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad.iter()) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam { m, v, t } => {
                *t += 1;
                let c1 = 1.0 - Self::BETA1.powi(*t);
                let c2 = 1.0 - Self::BETA2.powi(*t);
                for (((p, g), mk), vk) in params
                    .iter_mut()
                    .zip(grad.iter())
                    .zip(m.iter_mut())
                    .zip(v.iter_mut())
                {
                    *mk = Self::BETA1 * *mk + (1.0 - Self::BETA1) * g;
                    *vk = Self::BETA2 * *vk + (1.0 - Self::BETA2) * g * g;
                    *p -= lr * (*mk / c1) / ((*vk / c2).sqrt() + Self::EPS);
                }
            }
        }
    }
}
