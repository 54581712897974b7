use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ProfileNorm;
use crate::error::{ensure, invalid, shape, Error, Result};
use crate::nn::{self, Head, Layer, Network, Sample, Shape, Target, TrainConfig, TrainReport};
use crate::rng;

/// Output index of the damaged class.
pub const DAMAGED: usize = 1;

/// Labeled profile for supervised training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZSample {
    pub values: Vec<f64>,
    pub damaged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZCnnConfig {
    pub filter_a: usize,
    pub filter_b: usize,
    pub init_seed: u64,
    /// Fraction of samples withheld for the accuracy estimate.
    pub holdout: f64,
    pub train: TrainConfig,
}

impl Default for ZCnnConfig {
    fn default() -> Self {
        ZCnnConfig {
            filter_a: 8,
            filter_b: 8,
            init_seed: 0,
            holdout: 0.2,
            train: TrainConfig {
                learning_rate: 0.01,
                epochs: 40,
                batch_size: 8,
                momentum: 0.9,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZCnnModel {
    pub len: usize,
    pub filter_a: usize,
    pub filter_b: usize,
    pub norm: ProfileNorm,
    pub net: Network,
    pub init_seed: u64,
    #[serde(default)]
    pub train_config: Option<TrainConfig>,
    /// Accuracy on the withheld split, if one was used.
    #[serde(default)]
    pub heldout_accuracy: Option<f64>,
}

/// `conv1x5(a) -> pool2 -> conv1x5(b) -> pool2 -> dense(2) -> softmax`.
pub fn build_zcnn(len: usize, filter_a: usize, filter_b: usize, seed: u64) -> Result<ZCnnModel> {
    ensure!(
        len >= 4 && len % 4 == 0,
        shape(alloc::format!("profile length {len} must be a positive multiple of 4"))
    );
    ensure!(
        filter_a >= 1 && filter_b >= 1,
        invalid("filter counts must be >= 1")
    );
    let mut net = Network::new(
        Shape::new(1, len, 1),
        vec![
            Layer::conv(1, 5, 1, filter_a, true),
            Layer::MaxPool { ph: 1, pw: 2 },
            Layer::conv(1, 5, filter_a, filter_b, true),
            Layer::MaxPool { ph: 1, pw: 2 },
            Layer::dense(len / 4 * filter_b, Shape::new(1, 1, 2), false),
        ],
        Head::Softmax,
    )?;
    net.init_uniform(seed);
    Ok(ZCnnModel {
        len,
        filter_a,
        filter_b,
        norm: ProfileNorm::default(),
        net,
        init_seed: seed,
        train_config: None,
        heldout_accuracy: None,
    })
}

/// `[undamaged, damaged]` probabilities.
pub fn classify_profile(model: &ZCnnModel, values: &[f64]) -> Result<[f64; 2]> {
    ensure!(
        values.len() == model.len,
        shape(alloc::format!(
            "profile has {} values, model expects {}",
            values.len(),
            model.len
        ))
    );
    let p = model.net.predict(&model.norm.apply(values))?;
    Ok([p[0], p[1]])
}

fn accuracy(model: &ZCnnModel, set: &[&ZSample]) -> Result<f64> {
    let mut ok = 0usize;
    for s in set {
        let p = classify_profile(model, &s.values)?;
        ok += usize::from((p[DAMAGED] > 0.5) == s.damaged);
    }
    Ok(ok as f64 / set.len() as f64)
}

/// Supervised training on damaged and undamaged profiles. A seeded
/// `holdout` fraction is withheld and its accuracy stored in the model.
pub fn train_zcnn(samples: &[ZSample], config: &ZCnnConfig) -> Result<(ZCnnModel, TrainReport)> {
    ensure!(
        (0.0..1.0).contains(&config.holdout),
        invalid("holdout fraction must be in [0, 1)")
    );
    let damaged = samples.iter().filter(|s| s.damaged).count();
    ensure!(
        damaged > 0 && damaged < samples.len(),
        Error::DegenerateData(alloc::format!(
            "need damaged and undamaged profiles, got {damaged} of {}",
            samples.len()
        ))
    );
    let len = samples[0].values.len();
    ensure!(
        samples.iter().all(|s| s.values.len() == len),
        shape("profiles differ in length")
    );
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng::seeded(rng::substream(config.train.seed, "holdout")));
    let n_hold = crate::math::floor(config.holdout * samples.len() as f64) as usize;
    let (hold, fit) = order.split_at(n_hold);
    let fit: Vec<&ZSample> = fit.iter().map(|&i| &samples[i]).collect();
    let hold: Vec<&ZSample> = hold.iter().map(|&i| &samples[i]).collect();
    let fit_damaged = fit.iter().filter(|s| s.damaged).count();
    ensure!(
        fit_damaged > 0 && fit_damaged < fit.len(),
        Error::DegenerateData(alloc::string::String::from(
            "training split lost one of the classes"
        ))
    );

    let mut model = build_zcnn(len, config.filter_a, config.filter_b, config.init_seed)?;
    model.norm = ProfileNorm::fit(fit.iter().map(|s| s.values.as_slice()));
    let data: Vec<Sample> = fit
        .iter()
        .map(|s| Sample {
            input: model.norm.apply(&s.values),
            target: Target::Class(usize::from(s.damaged)),
        })
        .collect();
    let report = nn::train_sgd(&mut model.net, &data, &config.train)?;
    model.train_config = Some(config.train.clone());
    if !hold.is_empty() {
        model.heldout_accuracy = Some(accuracy(&model, &hold)?);
    }
    Ok((model, report))
}
