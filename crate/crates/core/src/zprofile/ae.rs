use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ZProfile;
use crate::error::{ensure, invalid, shape, Error, Result};
use crate::math::sqrt;
use crate::nn::{self, Head, Layer, Network, Sample, Shape, Target, TrainConfig, TrainReport};

/// Affine map applied to profile values before they enter a network:
/// `(v - offset) * scale`, without clamping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileNorm {
    pub offset: f64,
    pub scale: f64,
}

impl Default for ProfileNorm {
    fn default() -> Self {
        ProfileNorm {
            offset: 0.0,
            scale: 1.0,
        }
    }
}

impl ProfileNorm {
    /// Zero mean and unit variance over all values of all profiles.
    pub fn fit<'a>(profiles: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
        for p in profiles {
            for &v in p {
                n += 1;
                s += v;
                s2 += v * v;
            }
        }
        if n == 0 {
            return ProfileNorm::default();
        }
        let mean = s / n as f64;
        let var = (s2 / n as f64 - mean * mean).max(0.0);
        let sd = sqrt(var);
        ProfileNorm {
            offset: mean,
            scale: if sd > 1e-12 * mean.abs().max(1e-12) { 1.0 / sd } else { 1.0 },
        }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| (v - self.offset) * self.scale).collect()
    }

    pub fn invert(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&v| v / self.scale + self.offset).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    /// Channels of the convolutional stages.
    pub filters: usize,
    pub init_seed: u64,
    pub train: TrainConfig,
}

impl Default for AeConfig {
    fn default() -> Self {
        AeConfig {
            filters: 8,
            init_seed: 0,
            train: TrainConfig {
                learning_rate: 0.005,
                epochs: 60,
                batch_size: 8,
                momentum: 0.9,
                seed: 0,
            },
        }
    }
}

/// Sequence autoencoder over length-`len` profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeModel {
    pub len: usize,
    pub filters: usize,
    pub norm: ProfileNorm,
    pub net: Network,
    pub init_seed: u64,
    /// Set once the weights have been fitted to baseline profiles.
    pub trained_on_baseline: bool,
    #[serde(default)]
    pub train_config: Option<TrainConfig>,
}

/// `conv1x5(f) -> pool2 -> conv1x5(f) -> pool2 -> dense(len/4)` encoder and
/// `upsample2 -> conv1x5(f) -> upsample2 -> conv1x5(1)` decoder.
pub fn build_ae(len: usize, filters: usize, seed: u64) -> Result<AeModel> {
    ensure!(
        len >= 8 && len % 4 == 0,
        shape(alloc::format!("profile length {len} must be a multiple of 4 and >= 8"))
    );
    ensure!(filters >= 1, invalid("filter count must be >= 1"));
    let q = len / 4;
    let mut net = Network::new(
        Shape::new(1, len, 1),
        vec![
            Layer::conv(1, 5, 1, filters, true),
            Layer::MaxPool { ph: 1, pw: 2 },
            Layer::conv(1, 5, filters, filters, true),
            Layer::MaxPool { ph: 1, pw: 2 },
            Layer::dense(q * filters, Shape::new(1, q, 1), false),
            Layer::Upsample { fh: 1, fw: 2 },
            Layer::conv(1, 5, 1, filters, true),
            Layer::Upsample { fh: 1, fw: 2 },
            Layer::conv(1, 5, filters, 1, false),
        ],
        Head::Linear,
    )?;
    net.init_uniform(seed);
    Ok(AeModel {
        len,
        filters,
        norm: ProfileNorm::default(),
        net,
        init_seed: seed,
        trained_on_baseline: false,
        train_config: None,
    })
}

impl AeModel {
    pub fn bottleneck_len(&self) -> usize {
        self.len / 4
    }

    fn check_len(&self, n: usize) -> Result<()> {
        ensure!(
            n == self.len,
            shape(alloc::format!(
                "profile has {n} values, model expects {}",
                self.len
            ))
        );
        Ok(())
    }

    /// Reconstruction in the units of the input.
    pub fn reconstruct(&self, values: &[f64]) -> Result<Vec<f64>> {
        self.check_len(values.len())?;
        let out = self.net.predict(&self.norm.apply(values))?;
        Ok(self.norm.invert(&out))
    }
}

/// Fits an autoencoder to baseline profiles only, minimizing the mean
/// squared reconstruction error of normalized profiles.
pub fn train_ae(baseline: &[ZProfile], config: &AeConfig) -> Result<(AeModel, TrainReport)> {
    ensure!(
        !baseline.is_empty(),
        Error::DegenerateData(String::from("no baseline profiles"))
    );
    let len = baseline[0].values.len();
    ensure!(
        baseline.iter().all(|p| p.values.len() == len),
        shape("baseline profiles differ in length")
    );
    let mut model = build_ae(len, config.filters, config.init_seed)?;
    model.norm = ProfileNorm::fit(baseline.iter().map(|p| p.values.as_slice()));
    let samples: Vec<Sample> = baseline
        .iter()
        .map(|p| {
            let x = model.norm.apply(&p.values);
            Sample {
                target: Target::Values(x.clone()),
                input: x,
            }
        })
        .collect();
    let report = nn::train_sgd(&mut model.net, &samples, &config.train)?;
    model.trained_on_baseline = true;
    model.train_config = Some(config.train.clone());
    Ok((model, report))
}

/// Mean squared difference between a profile and its reconstruction.
pub fn anomaly_score(model: &AeModel, values: &[f64]) -> Result<f64> {
    let rec = model.reconstruct(values)?;
    Ok(values
        .iter()
        .zip(&rec)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / values.len() as f64)
}
