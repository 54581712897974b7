use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{patch_at, PatchNorm};
use crate::error::{ensure, invalid, shape, Error, Result};
use crate::math::round;
use crate::rng;
use crate::scene::GroundTruthMask;
use crate::xray::ProjectionImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentLabel {
    Background,
    Pore,
}

/// A labeled training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Normalized `size x size` values, row-major.
    pub patch: Vec<f64>,
    pub label: SegmentLabel,
    pub image_id: String,
    pub x: usize,
    pub y: usize,
}

/// Pore / background fractions of a training set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMix {
    pub pore: f64,
    pub background: f64,
}

impl ClassMix {
    pub fn new(pore: f64, background: f64) -> Result<Self> {
        ensure!(
            pore >= 0.0 && background >= 0.0 && ((pore + background) - 1.0).abs() < 1e-9,
            invalid(alloc::format!(
                "class fractions must be >= 0 and sum to 1, got {pore} + {background}"
            ))
        );
        Ok(ClassMix { pore, background })
    }

    /// Pore count for `total` segments; the rest are background.
    pub fn pore_count(&self, total: usize) -> usize {
        round(self.pore * total as f64) as usize
    }
}

/// How many windows to draw, and how.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSampling {
    pub size: usize,
    pub norm: PatchNorm,
    pub count: usize,
    pub mix: ClassMix,
    pub seed: u64,
}

/// Samples segment centers without replacement among pixels whose whole
/// window lies inside the image, `mix.pore` of them on defect pixels.
pub fn extract_training_segments(
    image: &ProjectionImage,
    mask: &GroundTruthMask,
    image_id: &str,
    req: &SegmentSampling,
) -> Result<Vec<Segment>> {
    let SegmentSampling {
        size,
        norm,
        count,
        mix,
        seed,
    } = *req;
    let mix = ClassMix::new(mix.pore, mix.background)?;
    ensure!(
        image.pixels.same_dims(&mask.mask),
        shape(alloc::format!(
            "mask is {}x{}, image {}x{}",
            mask.width(),
            mask.height(),
            image.width(),
            image.height()
        ))
    );
    ensure!(size >= 1, invalid("segment size must be >= 1"));
    let (w, h) = (image.width(), image.height());
    let lo = size / 2;
    let (mut pores, mut background) = (Vec::new(), Vec::new());
    if w >= size && h >= size {
        for y in lo..=h - size + lo {
            for x in lo..=w - size + lo {
                if mask.is_defect(x, y) {
                    pores.push((x, y));
                } else {
                    background.push((x, y));
                }
            }
        }
    }
    let n_pore = mix.pore_count(count);
    let n_bg = count - n_pore;
    for (class, want, have) in [
        ("pore", n_pore, pores.len()),
        ("background", n_bg, background.len()),
    ] {
        if want > have {
            return Err(Error::Sampling {
                class,
                requested: want,
                available: have,
            });
        }
    }
    let mut r = rng::seeded(seed);
    let mut out = Vec::with_capacity(count);
    for (pool, n, label) in [
        (&pores, n_pore, SegmentLabel::Pore),
        (&background, n_bg, SegmentLabel::Background),
    ] {
        let mut picks = sample(&mut r, pool.len(), n).into_vec();
        picks.sort_unstable();
        for i in picks {
            let (x, y) = pool[i];
            out.push(Segment {
                patch: patch_at(image, x, y, size, &norm),
                label,
                image_id: String::from(image_id),
                x,
                y,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{Mask, Raster};
    use crate::xray::ProjectionGeometry;

    fn setup() -> (ProjectionImage, GroundTruthMask) {
        let (w, h) = (80, 60);
        let img = ProjectionImage::new(
            Raster::from_fn(w, h, |x, y| ((x * 7 + y * 3) % 11) as f64 / 10.0),
            0.1,
        );
        let mask = Mask::from_fn(w, h, |x, y| (20..50).contains(&x) && (15..45).contains(&y));
        let gt = GroundTruthMask {
            mask,
            geometry: ProjectionGeometry::new(100.0, 200.0, 0.1, w, h),
        };
        (img, gt)
    }

    fn req(count: usize, pore: f64, seed: u64) -> SegmentSampling {
        SegmentSampling {
            size: 8,
            norm: PatchNorm::default(),
            count,
            mix: ClassMix::new(pore, 1.0 - pore).unwrap(),
            seed,
        }
    }

    #[test]
    fn mix_counts_and_labels() {
        let (img, gt) = setup();
        let segs = extract_training_segments(&img, &gt, "a", &req(1000, 0.3, 5)).unwrap();
        assert_eq!(segs.len(), 1000);
        let pores: Vec<_> = segs.iter().filter(|s| s.label == SegmentLabel::Pore).collect();
        assert_eq!(pores.len(), 300);
        assert!(pores.iter().all(|s| gt.is_defect(s.x, s.y)));
        assert!(segs
            .iter()
            .filter(|s| s.label == SegmentLabel::Background)
            .all(|s| !gt.is_defect(s.x, s.y)));
        // windows lie inside the image and are centered on the sample
        for s in &segs {
            assert!(s.x >= 4 && s.x + 4 <= 80 && s.y >= 4 && s.y + 4 <= 60);
            assert_eq!(s.patch[4 * 8 + 4], img.get(s.x, s.y).clamp(0.0, 1.0));
        }
        let mut centers: Vec<_> = segs.iter().map(|s| (s.x, s.y)).collect();
        centers.sort_unstable();
        centers.dedup();
        assert_eq!(centers.len(), 1000);
    }

    #[test]
    fn seeded() {
        let (img, gt) = setup();
        let a = extract_training_segments(&img, &gt, "a", &req(50, 0.3, 5)).unwrap();
        let b = extract_training_segments(&img, &gt, "a", &req(50, 0.3, 5)).unwrap();
        let c = extract_training_segments(&img, &gt, "a", &req(50, 0.3, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn insufficient_pixels() {
        let (img, mut gt) = setup();
        gt.mask = Mask::filled(80, 60, false);
        assert_eq!(
            extract_training_segments(&img, &gt, "a", &req(10, 0.3, 1)),
            Err(Error::Sampling {
                class: "pore",
                requested: 3,
                available: 0
            })
        );
        assert!(ClassMix::new(0.3, 0.6).is_err());
    }
}
