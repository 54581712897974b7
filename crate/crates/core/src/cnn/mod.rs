//! Patch-based semantic pixel classifier: two conv/pool stages and a
//! two-class softmax, applied to every pixel through a sliding window.

mod model;
mod segments;
mod window;

pub use model::{build, forward, grad_check, train, Arch, CnnModel, PatchNorm, POSITIVE};
pub use segments::{extract_training_segments, ClassMix, Segment, SegmentLabel, SegmentSampling};
pub use window::{patch_at, sliding_window_classify, FeatureMap};
