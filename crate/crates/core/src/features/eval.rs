use serde::{Deserialize, Serialize};

use crate::error::{ensure, shape, Result};
use crate::raster::Mask;
use crate::scene::GroundTruthMask;

/// Pixel confusion counts and rates. Rates are `None` when their
/// denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelScores {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
    pub tp_rate: Option<f64>,
    pub fn_rate: Option<f64>,
    pub fp_rate: Option<f64>,
    pub precision: Option<f64>,
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

pub fn evaluate_pixels(pred: &Mask, truth: &GroundTruthMask) -> Result<PixelScores> {
    ensure!(
        pred.same_dims(&truth.mask),
        shape(alloc::format!(
            "prediction is {}x{}, truth {}x{}",
            pred.width,
            pred.height,
            truth.width(),
            truth.height()
        ))
    );
    let (mut tp, mut fn_, mut fp, mut tn) = (0, 0, 0, 0);
    for (&p, &t) in pred.data.iter().zip(&truth.mask.data) {
        match (p, t) {
            (true, true) => tp += 1,
            (false, true) => fn_ += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    let tp_rate = ratio(tp, tp + fn_);
    Ok(PixelScores {
        tp,
        fn_,
        fp,
        tn,
        tp_rate,
        fn_rate: tp_rate.map(|r| 1.0 - r),
        fp_rate: ratio(fp, fp + tn),
        precision: ratio(tp, tp + fp),
    })
}
