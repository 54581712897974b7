//! From feature maps to defect tables.

mod canny;
mod dbscan;
mod ellipse;
mod eval;
mod report;

pub use canny::canny;
pub use dbscan::{dbscan, ClusterSet};
pub use ellipse::{fit_clusters, fit_ellipse, fit_ellipse_with, EllipseFit, FitOptions};
pub use eval::{evaluate_pixels, PixelScores};
pub use report::{pore_report, PoreReport, PoreRow, REPORT_HEADER};

use alloc::vec::Vec;

use crate::cnn::FeatureMap;
use crate::error::{ensure, invalid, Result};
use crate::raster::Mask;

/// Pixel coordinates `(x, y)`; `y` grows downwards.
pub type Point = [f64; 2];

/// Pixels with score `>= tau`, as a mask and as points in row-major order.
pub fn threshold_map(map: &FeatureMap, tau: f64) -> Result<(Mask, Vec<Point>)> {
    ensure!(
        (0.0..=1.0).contains(&tau),
        invalid(alloc::format!("threshold {tau} outside [0, 1]"))
    );
    let mask = map.scores.map(|&s| s >= tau);
    let mut pts = Vec::with_capacity(mask.count());
    for y in 0..mask.height {
        for x in 0..mask.width {
            if *mask.get(x, y) {
                pts.push([x as f64, y as f64]);
            }
        }
    }
    Ok((mask, pts))
}
