use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, invalid, Result};
use crate::geom::{Mat3, Vec3};

/// Point-source cone-beam setup.
///
/// The source sits at `(0, 0, -sod)` and the beam axis is +z. The detector
/// plane is centered at `(0, 0, sdd - sod)` (plus `detector_offset` within
/// the plane and an optional tilt about its center); detector columns run
/// along +x and rows along +y. The specimen is rotated about the vertical
/// (y) axis through `rotation_center` by `rotation_deg`:
/// `world = Ry(rotation) * (p - c) + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionGeometry {
    pub sod: f64,
    pub sdd: f64,
    pub pixel_pitch: f64,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub detector_offset: [f64; 2],
    #[serde(default)]
    pub detector_tilt_deg: Vec3,
    #[serde(default)]
    pub rotation_deg: f64,
    #[serde(default)]
    pub rotation_center: Vec3,
}

impl ProjectionGeometry {
    /// Centered detector, no tilt, no rotation.
    pub fn new(sod: f64, sdd: f64, pixel_pitch: f64, width: usize, height: usize) -> Self {
        ProjectionGeometry {
            sod,
            sdd,
            pixel_pitch,
            width,
            height,
            detector_offset: [0.0, 0.0],
            detector_tilt_deg: Vec3::ZERO,
            rotation_deg: 0.0,
            rotation_center: Vec3::ZERO,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.sod > 0.0 && self.sod < self.sdd,
            invalid(format!(
                "need 0 < SOD < SDD, got SOD {} SDD {}",
                self.sod, self.sdd
            ))
        );
        ensure!(
            self.pixel_pitch > 0.0,
            invalid("pixel pitch must be positive")
        );
        ensure!(
            self.width > 0 && self.height > 0,
            invalid("detector needs at least one pixel")
        );
        Ok(())
    }

    pub fn magnification(&self) -> f64 {
        self.sdd / self.sod
    }

    pub fn with_rotation(&self, deg: f64) -> Self {
        ProjectionGeometry {
            rotation_deg: deg,
            ..self.clone()
        }
    }

    pub fn source(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.sod)
    }

    fn tilt(&self) -> Mat3 {
        Mat3::euler_xyz(self.detector_tilt_deg)
    }

    /// World position of the center of pixel `(col, row)`.
    pub fn pixel_center(&self, col: usize, row: usize) -> Vec3 {
        let (u, v) = self.pixel_uv(col as f64 + 0.5, row as f64 + 0.5);
        self.detector_center() + self.tilt().apply(Vec3::new(u, v, 0.0))
    }

    /// In-plane detector coordinates (mm) of fractional pixel position.
    pub fn pixel_uv(&self, col: f64, row: f64) -> (f64, f64) {
        (
            (col - self.width as f64 / 2.0) * self.pixel_pitch + self.detector_offset[0],
            (row - self.height as f64 / 2.0) * self.pixel_pitch + self.detector_offset[1],
        )
    }

    pub fn detector_center(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.sdd - self.sod)
    }

    /// Precomputes the per-pixel ray generator in the specimen frame.
    pub fn rays(&self) -> PixelRays {
        let rot = Mat3::rot_y(self.rotation_deg);
        let inv = rot.transpose();
        let c = self.rotation_center;
        let tilt = self.tilt();
        PixelRays {
            source_obj: inv.apply(self.source() - c) + c,
            inv_rotation: inv,
            source_world: self.source(),
            detector_center: self.detector_center(),
            u_axis: tilt.apply(Vec3::new(1.0, 0.0, 0.0)),
            v_axis: tilt.apply(Vec3::new(0.0, 1.0, 0.0)),
            geometry: self.clone(),
        }
    }

    /// Fractional pixel coordinates `(col, row)` where the ray from the
    /// source through specimen-frame point `p` meets the detector, measured
    /// so that pixel `(i, j)` spans `[i, i+1) x [j, j+1)`.
    pub fn project_point(&self, p: Vec3) -> Option<(f64, f64)> {
        let rot = Mat3::rot_y(self.rotation_deg);
        let c = self.rotation_center;
        let world = rot.apply(p - c) + c;
        let tilt = self.tilt();
        let n = tilt.apply(Vec3::new(0.0, 0.0, 1.0));
        let src = self.source();
        let d = world - src;
        let denom = d.dot(n);
        if denom.abs() < 1e-15 {
            return None;
        }
        let t = (self.detector_center() - src).dot(n) / denom;
        if t <= 0.0 {
            return None;
        }
        let hit = src + d * t - self.detector_center();
        let u = hit.dot(tilt.apply(Vec3::new(1.0, 0.0, 0.0))) - self.detector_offset[0];
        let v = hit.dot(tilt.apply(Vec3::new(0.0, 1.0, 0.0))) - self.detector_offset[1];
        Some((
            u / self.pixel_pitch + self.width as f64 / 2.0,
            v / self.pixel_pitch + self.height as f64 / 2.0,
        ))
    }
}

/// Source-to-pixel rays expressed in the specimen frame.
#[derive(Debug, Clone)]
pub struct PixelRays {
    source_obj: Vec3,
    inv_rotation: Mat3,
    source_world: Vec3,
    detector_center: Vec3,
    u_axis: Vec3,
    v_axis: Vec3,
    geometry: ProjectionGeometry,
}

impl PixelRays {
    /// `(origin, direction)` of the ray through the center of pixel
    /// `(col, row)`; `origin + 1.0 * direction` is the pixel center.
    #[inline]
    pub fn ray(&self, col: usize, row: usize) -> (Vec3, Vec3) {
        let (u, v) = self
            .geometry
            .pixel_uv(col as f64 + 0.5, row as f64 + 0.5);
        let pix = self.detector_center + self.u_axis * u + self.v_axis * v;
        (self.source_obj, self.inv_rotation.apply(pix - self.source_world))
    }

    pub fn geometry(&self) -> &ProjectionGeometry {
        &self.geometry
    }
}

/// Rotation series description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub count: usize,
    pub start_deg: f64,
    /// Angular range; angles are `start + k * range / count`, endpoint
    /// excluded.
    pub range_deg: f64,
    pub geometry: ProjectionGeometry,
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.count >= 1, invalid("projection count must be >= 1"));
        ensure!(
            self.count == 1 || self.range_deg > 0.0,
            invalid("angular range must be positive")
        );
        self.geometry.validate()
    }

    pub fn angles(&self) -> Vec<f64> {
        let step = self.range_deg / self.count as f64;
        (0..self.count)
            .map(|k| self.start_deg + k as f64 * step)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ProjectionGeometry::new(300.0, 600.0, 0.15, 10, 10).validate().is_ok());
        assert!(ProjectionGeometry::new(600.0, 300.0, 0.15, 10, 10).validate().is_err());
        assert!(ProjectionGeometry::new(300.0, 600.0, 0.0, 10, 10).validate().is_err());
    }

    #[test]
    fn central_ray_hits_detector_center() {
        let g = ProjectionGeometry::new(300.0, 600.0, 0.15, 2, 2);
        let (o, d) = g.rays().ray(1, 1);
        let hit = o + d;
        assert!((hit - Vec3::new(0.075, 0.075, 300.0)).norm() < 1e-12);
        let (c, r) = g.project_point(Vec3::ZERO).unwrap();
        assert!((c - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        // magnification 2: 1 mm at the isocenter spans 2 mm on the detector
        let (c2, _) = g.project_point(Vec3::new(0.15, 0.0, 0.0)).unwrap();
        assert!((c2 - 3.0).abs() < 1e-9);
        assert_eq!(g.magnification(), 2.0);
    }

    #[test]
    fn rotated_rays_match_projected_points() {
        let mut g = ProjectionGeometry::new(200.0, 500.0, 0.1, 64, 48);
        g.rotation_deg = 33.0;
        g.rotation_center = Vec3::new(0.5, 0.0, -0.3);
        let p = Vec3::new(1.2, -0.7, 0.4);
        let (c, r) = g.project_point(p).unwrap();
        let rays = g.rays();
        // the ray toward the projected position passes through p
        let (ci, ri) = (crate::math::floor(c) as usize, crate::math::floor(r) as usize);
        let (o, d) = rays.ray(ci, ri);
        let (o2, d2) = rays.ray(ci + 1, ri + 1);
        let dist = |o: Vec3, d: Vec3| (p - o).cross(d).norm() / d.norm();
        assert!(dist(o, d) < 0.2 && dist(o2, d2) < 0.2);
    }

    #[test]
    fn angle_steps() {
        let cfg = AcquisitionConfig {
            count: 400,
            start_deg: 0.0,
            range_deg: 180.0,
            geometry: ProjectionGeometry::new(300.0, 600.0, 0.15, 4, 4),
        };
        let a = cfg.angles();
        assert_eq!(a.len(), 400);
        assert!((a[1] - 0.45).abs() < 1e-12);
        assert!(a.windows(2).all(|w| w[1] > w[0]));
    }
}
