use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Segment, SegmentLabel};
use crate::error::{ensure, invalid, shape, Error, Result};
use crate::nn::{self, GradCheckReport, Head, Layer, Network, Sample, Shape, Target, TrainConfig, TrainReport};

/// Output index of the defect ("pore") class.
pub const POSITIVE: usize = 1;

/// `[segment_size-filter_a-filter_b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arch {
    pub segment_size: usize,
    pub filter_a: usize,
    pub filter_b: usize,
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}-{}", self.segment_size, self.filter_a, self.filter_b)
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim_matches(|c| c == '[' || c == ']').split('-').collect();
        let nums: Option<Vec<usize>> = parts.iter().map(|p| p.trim().parse().ok()).collect();
        match nums.as_deref() {
            Some(&[segment_size, filter_a, filter_b]) => Ok(Arch {
                segment_size,
                filter_a,
                filter_b,
            }),
            _ => Err(invalid(alloc::format!(
                "architecture '{s}' is not of the form size-filterA-filterB"
            ))),
        }
    }
}

/// Maps raw `I / I0` values to network inputs: `clamp((v - offset) * scale,
/// 0, 1)`. The identity setting (`offset 0`, `scale 1`) just clamps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchNorm {
    pub offset: f64,
    pub scale: f64,
}

impl Default for PatchNorm {
    fn default() -> Self {
        PatchNorm {
            offset: 0.0,
            scale: 1.0,
        }
    }
}

impl PatchNorm {
    /// Stretches `[lo, hi]` to `[0, 1]`.
    pub fn from_range(lo: f64, hi: f64) -> Result<Self> {
        ensure!(hi > lo, invalid("normalization range must be non-empty"));
        Ok(PatchNorm {
            offset: lo,
            scale: 1.0 / (hi - lo),
        })
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        ((v - self.offset) * self.scale).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub arch: Arch,
    pub norm: PatchNorm,
    pub net: Network,
    pub init_seed: u64,
    #[serde(default)]
    pub train_config: Option<TrainConfig>,
}

/// Builds `conv5x5(a, relu) -> maxpool2 -> conv5x5(b, relu) -> maxpool2 ->
/// dense(2) -> softmax` with seeded initial weights.
pub fn build(segment_size: usize, filter_a: usize, filter_b: usize, seed: u64) -> Result<CnnModel> {
    ensure!(
        segment_size >= 4 && segment_size % 4 == 0,
        shape(alloc::format!(
            "segment size {segment_size} must be a positive multiple of 4"
        ))
    );
    ensure!(
        filter_a >= 1 && filter_b >= 1,
        invalid("filter counts must be >= 1")
    );
    let q = segment_size / 4;
    let mut net = Network::new(
        Shape::new(segment_size, segment_size, 1),
        vec![
            Layer::conv(5, 5, 1, filter_a, true),
            Layer::MaxPool { ph: 2, pw: 2 },
            Layer::conv(5, 5, filter_a, filter_b, true),
            Layer::MaxPool { ph: 2, pw: 2 },
            Layer::dense(q * q * filter_b, Shape::new(1, 1, 2), false),
        ],
        Head::Softmax,
    )?;
    net.init_uniform(seed);
    Ok(CnnModel {
        arch: Arch {
            segment_size,
            filter_a,
            filter_b,
        },
        norm: PatchNorm::default(),
        net,
        init_seed: seed,
        train_config: None,
    })
}

impl CnnModel {
    pub fn from_arch(arch: Arch, seed: u64) -> Result<Self> {
        build(arch.segment_size, arch.filter_a, arch.filter_b, seed)
    }

    /// Length of the flattened input of the dense layer.
    pub fn dense_input_len(&self) -> usize {
        match self.net.layers.last() {
            Some(Layer::Dense { nin, .. }) => *nin,
            _ => 0,
        }
    }
}

/// Class probabilities `[background, pore]` of an already normalized patch.
pub fn forward(model: &CnnModel, patch: &[f64]) -> Result<[f64; 2]> {
    let p = model.net.predict(patch)?;
    Ok([p[0], p[1]])
}

fn label_index(l: SegmentLabel) -> usize {
    match l {
        SegmentLabel::Background => 0,
        SegmentLabel::Pore => POSITIVE,
    }
}

/// Trains on labeled segments with mini-batch SGD on cross-entropy.
pub fn train(model: &mut CnnModel, segments: &[Segment], config: &TrainConfig) -> Result<TrainReport> {
    ensure!(
        segments.len() >= 2,
        Error::DegenerateData(String::from("need at least two segments"))
    );
    let pores = segments.iter().filter(|s| s.label == SegmentLabel::Pore).count();
    ensure!(
        pores > 0 && pores < segments.len(),
        Error::DegenerateData(alloc::format!(
            "training set has a single class ({pores} pore of {} segments)",
            segments.len()
        ))
    );
    let samples: Vec<Sample> = segments
        .iter()
        .map(|s| Sample {
            input: s.patch.clone(),
            target: Target::Class(label_index(s.label)),
        })
        .collect();
    let report = nn::train_sgd(&mut model.net, &samples, config)?;
    model.train_config = Some(config.clone());
    Ok(report)
}

/// Backprop vs central differences on a 1% parameter sample.
pub fn grad_check(model: &CnnModel, patch: &[f64], label: SegmentLabel, seed: u64) -> Result<GradCheckReport> {
    nn::grad_check(&model.net, patch, &Target::Class(label_index(label)), 0.01, seed)
}
