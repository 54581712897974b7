//! Small f64 neural networks: same-padded convolutions, max pooling,
//! nearest upsampling and dense layers, trained by mini-batch SGD.
//!
//! Tensors are `(height, width, channels)` with channels fastest. 1D
//! sequences use height 1.

mod gradcheck;
mod layer;
mod network;
mod train;

pub use gradcheck::{grad_check, GradCheckReport};
pub use layer::{Layer, Shape};
pub use network::{softmax, Forward, Gradients, Head, Network, Scratch, Target};
pub use train::{train_sgd, EpochStats, Sample, TrainConfig, TrainReport};
