use serde::{Deserialize, Serialize};

use super::SpecimenSpec;
use crate::math::{ceil, floor};
use crate::raster::Mask;
use crate::xray::ProjectionGeometry;

/// Per-pixel defect labels for one projection; `true` marks a defect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMask {
    pub mask: Mask,
    pub geometry: ProjectionGeometry,
}

impl GroundTruthMask {
    pub fn width(&self) -> usize {
        self.mask.width
    }

    pub fn height(&self) -> usize {
        self.mask.height
    }

    pub fn is_defect(&self, x: usize, y: usize) -> bool {
        *self.mask.get(x, y)
    }
}

/// Marks every pixel whose source-to-pixel-center ray passes through a
/// defect ellipsoid. Uses the analytic ellipsoids, not their meshes.
pub fn ground_truth_mask(spec: &SpecimenSpec, geometry: &ProjectionGeometry) -> GroundTruthMask {
    let (w, h) = (geometry.width, geometry.height);
    let mut mask = Mask::filled(w, h, false);
    let rays = geometry.rays();
    for pore in &spec.defects {
        // The projected bounding box corners bound the ellipsoid's shadow.
        let e = pore.half_extents();
        let (mut c0, mut c1, mut r0, mut r1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        let mut visible = true;
        for k in 0..8 {
            let corner = pore.center
                + crate::geom::Vec3::new(
                    if k & 1 == 0 { -e.x } else { e.x },
                    if k & 2 == 0 { -e.y } else { e.y },
                    if k & 4 == 0 { -e.z } else { e.z },
                );
            match geometry.project_point(corner) {
                Some((c, r)) => {
                    c0 = c0.min(c);
                    c1 = c1.max(c);
                    r0 = r0.min(r);
                    r1 = r1.max(r);
                }
                None => visible = false,
            }
        }
        let (x0, x1, y0, y1) = if visible {
            (
                floor(c0 - 1.0).max(0.0) as usize,
                (ceil(c1 + 1.0).max(0.0) as usize).min(w),
                floor(r0 - 1.0).max(0.0) as usize,
                (ceil(r1 + 1.0).max(0.0) as usize).min(h),
            )
        } else {
            (0, w, 0, h)
        };
        for y in y0..y1 {
            for x in x0..x1 {
                if !*mask.get(x, y) {
                    let (o, d) = rays.ray(x, y);
                    if pore.ray_hits(o, d) {
                        mask.set(x, y, true);
                    }
                }
            }
        }
    }
    GroundTruthMask {
        mask,
        geometry: geometry.clone(),
    }
}
