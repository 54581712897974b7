use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Gradients, Head, Network, Target};
use crate::error::{ensure, invalid, Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Classical momentum coefficient; 0 is plain SGD.
    #[serde(default)]
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 100,
            batch_size: 16,
            momentum: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.epochs >= 1, invalid("epochs must be >= 1"));
        ensure!(self.batch_size >= 1, invalid("batch size must be >= 1"));
        ensure!(
            self.learning_rate >= 0.0 && self.learning_rate.is_finite(),
            invalid("learning rate must be finite and >= 0")
        );
        ensure!(
            (0.0..1.0).contains(&self.momentum),
            invalid("momentum must be in [0, 1)")
        );
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss over the training set after the epoch (epoch 0: before
    /// training).
    pub loss: f64,
    /// Fraction of correctly classified samples; NaN for regression.
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.history.first().map_or(f64::NAN, |e| e.loss)
    }

    pub fn final_loss(&self) -> f64 {
        self.history.last().map_or(f64::NAN, |e| e.loss)
    }
}

fn evaluate(net: &Network, data: &[Sample]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in data {
        let fwd = net.forward(&s.input)?;
        loss += net.loss(&s.input, &s.target)?;
        if let (Head::Softmax, Target::Class(c)) = (net.head, &s.target) {
            let best = fwd
                .output
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &p)| if p > b.1 { (i, p) } else { b })
                .0;
            correct += usize::from(best == *c);
        }
    }
    let n = data.len() as f64;
    let acc = if net.head == Head::Softmax {
        correct as f64 / n
    } else {
        f64::NAN
    };
    Ok((loss / n, acc))
}

/// Mini-batch SGD on the mean loss. Samples are shuffled every epoch from
/// the seed; gradients are summed in batch order, so runs are repeatable.
pub fn train_sgd(net: &mut Network, data: &[Sample], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    ensure!(
        !data.is_empty(),
        Error::DegenerateData(alloc::string::String::from("no training samples"))
    );
    let mut shuffle = rng::seeded(rng::substream(config.seed, "shuffle"));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = Gradients::zeros_like(net);
    let mut velocity = Gradients::zeros_like(net);
    let (loss0, acc0) = evaluate(net, data)?;
    let mut history = alloc::vec![EpochStats {
        epoch: 0,
        loss: loss0,
        train_accuracy: acc0,
    }];
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle);
        for batch in order.chunks(config.batch_size) {
            grads.clear();
            for &i in batch {
                net.accumulate_gradients(&data[i].input, &data[i].target, &mut grads)?;
            }
            let step = config.learning_rate / batch.len() as f64;
            for (l, (g, v)) in net
                .layers
                .iter_mut()
                .zip(grads.0.iter().zip(velocity.0.iter_mut()))
            {
                for ((p, &gv), vv) in l.params_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                    *vv = config.momentum * *vv - step * gv;
                    *p += *vv;
                }
            }
        }
        let (loss, acc) = evaluate(net, data)?;
        history.push(EpochStats {
            epoch,
            loss,
            train_accuracy: acc,
        });
    }
    Ok(TrainReport { history })
}
