use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{CnnModel, PatchNorm, POSITIVE};
use crate::error::{ensure, shape, Result};
use crate::nn::Scratch;
use crate::raster::{reflect, Mask, Raster};
use crate::xray::ProjectionImage;

/// Per-pixel pore probability and the argmax decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub scores: Raster<f64>,
    pub classes: Mask,
}

impl FeatureMap {
    pub fn width(&self) -> usize {
        self.scores.width
    }

    pub fn height(&self) -> usize {
        self.scores.height
    }

    pub fn score(&self, x: usize, y: usize) -> f64 {
        *self.scores.get(x, y)
    }
}

/// Normalized `size x size` window whose top-left pixel is
/// `(x - size/2, y - size/2)`; outside pixels are mirrored without
/// repeating the edge.
pub fn patch_at(image: &ProjectionImage, x: usize, y: usize, size: usize, norm: &PatchNorm) -> Vec<f64> {
    let mut out = Vec::with_capacity(size * size);
    fill_patch(image, x, y, size, norm, &mut out);
    out
}

fn fill_patch(image: &ProjectionImage, x: usize, y: usize, size: usize, norm: &PatchNorm, out: &mut Vec<f64>) {
    out.clear();
    let (w, h) = (image.width(), image.height());
    let x0 = x as isize - (size / 2) as isize;
    let y0 = y as isize - (size / 2) as isize;
    for dy in 0..size as isize {
        let sy = reflect(y0 + dy, h);
        let row = &image.pixels.data[sy * w..(sy + 1) * w];
        for dx in 0..size as isize {
            out.push(norm.apply(row[reflect(x0 + dx, w)]));
        }
    }
}

/// Runs the model on the window around every pixel.
pub fn sliding_window_classify(model: &CnnModel, image: &ProjectionImage) -> Result<FeatureMap> {
    let s = model.arch.segment_size;
    let (w, h) = (image.width(), image.height());
    ensure!(
        w >= s && h >= s,
        shape(alloc::format!(
            "image {w}x{h} is smaller than the {s}x{s} segment"
        ))
    );
    let mut scores = alloc::vec![0.0; w * h];
    crate::par::fill_rows(&mut scores, w, |y, row| {
        let mut scratch = Scratch::default();
        let mut patch = Vec::with_capacity(s * s);
        for (x, v) in row.iter_mut().enumerate() {
            fill_patch(image, x, y, s, &model.norm, &mut patch);
            *v = model.net.predict_with(&patch, &mut scratch)?[POSITIVE];
        }
        Ok(())
    })?;
    let scores = Raster::from_vec(w, h, scores)?;
    let classes = scores.map(|&p| p > 0.5);
    Ok(FeatureMap { scores, classes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnn::{build, forward};
    use rand::Rng;

    fn image(w: usize, h: usize) -> ProjectionImage {
        ProjectionImage::new(
            Raster::from_fn(w, h, |x, y| 0.5 + 0.4 * libm::sin(x as f64 * 0.3) * libm::cos(y as f64 * 0.2)),
            0.1,
        )
    }

    #[test]
    fn constant_image_gives_constant_map() {
        let m = build(8, 4, 4, 1).unwrap();
        let img = ProjectionImage::new(Raster::filled(20, 12, 0.4), 0.1);
        let f = sliding_window_classify(&m, &img).unwrap();
        assert_eq!((f.width(), f.height()), (20, 12));
        assert!(f.scores.data.iter().all(|&v| v == f.scores.data[0]));
    }

    #[test]
    fn map_equals_per_patch_forward() {
        let m = build(8, 4, 4, 5).unwrap();
        let img = image(40, 30);
        let f = sliding_window_classify(&m, &img).unwrap();
        let mut r = crate::rng::seeded(1);
        for _ in 0..100 {
            let (x, y) = (r.random_range(4..36), r.random_range(4..26));
            let p = forward(&m, &patch_at(&img, x, y, 8, &m.norm)).unwrap();
            assert_eq!(f.score(x, y), p[1]);
            assert_eq!(*f.classes.get(x, y), p[1] > 0.5);
        }
        // border pixels follow the same rule through mirrored windows
        let p = forward(&m, &patch_at(&img, 0, 0, 8, &m.norm)).unwrap();
        assert_eq!(f.score(0, 0), p[1]);
    }

    #[test]
    fn reflect_padding() {
        let img = ProjectionImage::new(Raster::from_fn(4, 4, |x, y| (y * 4 + x) as f64 / 16.0), 0.1);
        let p = patch_at(&img, 0, 0, 4, &PatchNorm::default());
        // rows -2, -1, 0, 1 map to 2, 1, 0, 1
        assert_eq!(p[0], 10.0 / 16.0);
        assert_eq!(p[5], 5.0 / 16.0);
        assert_eq!(p[10], 0.0);
    }

    #[test]
    fn undersized_image() {
        let m = build(8, 4, 4, 1).unwrap();
        assert!(matches!(
            sliding_window_classify(&m, &image(7, 20)),
            Err(crate::Error::Shape(_))
        ));
    }
}
