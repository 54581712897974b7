//! Points, rigid/affine transforms and bounding boxes. Lengths are in mm.

use core::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::math::{cos, deg_to_rad, sin, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const ONE: Vec3 = Vec3::new(1.0, 1.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn splat(v: f64) -> Self {
        Vec3::new(v, v, v)
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        sqrt(self.dot(self))
    }

    pub fn normalized(self) -> Vec3 {
        self / self.norm()
    }

    pub fn mul_elem(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn diag(d: Vec3) -> Mat3 {
        Mat3([[d.x, 0.0, 0.0], [0.0, d.y, 0.0], [0.0, 0.0, d.z]])
    }

    pub fn rot_x(deg: f64) -> Mat3 {
        let (s, c) = (sin(deg_to_rad(deg)), cos(deg_to_rad(deg)));
        Mat3([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y(deg: f64) -> Mat3 {
        let (s, c) = (sin(deg_to_rad(deg)), cos(deg_to_rad(deg)));
        Mat3([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z(deg: f64) -> Mat3 {
        let (s, c) = (sin(deg_to_rad(deg)), cos(deg_to_rad(deg)));
        Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    /// Rotation by `angles` (degrees) about the fixed X, then Y, then Z axes,
    /// i.e. `Rz * Ry * Rx`. This is the OpenSCAD `rotate([x, y, z])` order.
    pub fn euler_xyz(angles: Vec3) -> Mat3 {
        Mat3::rot_z(angles.z) * Mat3::rot_y(angles.y) * Mat3::rot_x(angles.x)
    }

    pub fn apply(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn transpose(&self) -> Mat3 {
        let m = &self.0;
        Mat3([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn inverse(&self) -> Option<Mat3> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        let inv = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        let mut out = [[0.0; 3]; 3];
        for (r, row) in inv.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                out[r][c] = v / d;
            }
        }
        Some(Mat3(out))
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, o: Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[r][k] * o.0[k][c]).sum();
            }
        }
        Mat3(out)
    }
}

/// `p -> linear * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub linear: Mat3,
    pub translation: Vec3,
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        linear: Mat3::IDENTITY,
        translation: Vec3::ZERO,
    };

    pub fn apply(&self, p: Vec3) -> Vec3 {
        self.linear.apply(p) + self.translation
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &Affine) -> Affine {
        Affine {
            linear: self.linear * inner.linear,
            translation: self.linear.apply(inner.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Option<Affine> {
        let li = self.linear.inverse()?;
        Some(Affine {
            linear: li,
            translation: -li.apply(self.translation),
        })
    }
}

/// Scale, then rotate (Euler XYZ, degrees), then translate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub translation: Vec3,
    pub rotation_deg: Vec3,
    pub scale: Vec3,
}

impl Default for Transform {
    fn default() -> Self {
        Transform {
            translation: Vec3::ZERO,
            rotation_deg: Vec3::ZERO,
            scale: Vec3::ONE,
        }
    }
}

impl Transform {
    pub fn translate(t: Vec3) -> Self {
        Transform {
            translation: t,
            ..Default::default()
        }
    }

    pub fn rotate(deg: Vec3) -> Self {
        Transform {
            rotation_deg: deg,
            ..Default::default()
        }
    }

    pub fn scale(s: Vec3) -> Self {
        Transform {
            scale: s,
            ..Default::default()
        }
    }

    pub fn to_affine(&self) -> Affine {
        Affine {
            linear: Mat3::euler_xyz(self.rotation_deg) * Mat3::diag(self.scale),
            translation: self.translation,
        }
    }

    pub fn has_valid_scale(&self) -> bool {
        self.scale.x > 0.0 && self.scale.y > 0.0 && self.scale.z > 0.0
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::splat(f64::INFINITY),
            max: Vec3::splat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Aabb::empty();
        for p in pts {
            b.grow(*p);
        }
        b
    }

    pub fn grow(&mut self, p: Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Slab test; returns the parametric `[t0, t1]` overlap of the ray with
    /// the box (padded by `pad`), if any.
    pub fn ray_interval(&self, origin: Vec3, inv_dir: Vec3, pad: f64) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for axis in 0..3 {
            let lo = (self.min[axis] - pad - origin[axis]) * inv_dir[axis];
            let hi = (self.max[axis] + pad - origin[axis]) * inv_dir[axis];
            let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            // NaN arises for a zero direction component with the origin on a
            // slab plane; treat that as inside the slab.
            if !a.is_nan() {
                t0 = t0.max(a);
            }
            if !b.is_nan() {
                t1 = t1.min(b);
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn euler_matches_openscad_order() {
        // rotate([90, 0, 0]) maps +y to +z.
        let r = Mat3::euler_xyz(Vec3::new(90.0, 0.0, 0.0));
        assert!(close(r.apply(Vec3::new(0.0, 1.0, 0.0)), Vec3::new(0.0, 0.0, 1.0)));
        // X first, then Z: +y -> +z (about x) -> +z (about z unchanged).
        let r = Mat3::euler_xyz(Vec3::new(90.0, 0.0, 90.0));
        assert!(close(r.apply(Vec3::new(0.0, 1.0, 0.0)), Vec3::new(0.0, 0.0, 1.0)));
        assert!(close(r.apply(Vec3::new(1.0, 0.0, 0.0)), Vec3::new(0.0, 1.0, 0.0)));
    }

    #[test]
    fn transform_applies_scale_rotate_translate() {
        let t = Transform {
            translation: Vec3::new(1.0, 0.0, 0.0),
            rotation_deg: Vec3::new(0.0, 0.0, 90.0),
            scale: Vec3::new(2.0, 1.0, 1.0),
        };
        let p = t.to_affine().apply(Vec3::new(1.0, 0.0, 0.0));
        assert!(close(p, Vec3::new(1.0, 2.0, 0.0)));
    }

    #[test]
    fn affine_inverse_round_trips() {
        let t = Transform {
            translation: Vec3::new(9.24, 2.06, -0.97),
            rotation_deg: Vec3::new(10.0, -20.0, 30.0),
            scale: Vec3::new(0.96, 0.86, 1.31),
        }
        .to_affine();
        let inv = t.inverse().unwrap();
        let p = Vec3::new(0.3, -1.2, 4.0);
        assert!(close(inv.apply(t.apply(p)), p));
        assert!(close(t.compose(&inv).apply(p), p));
    }

    #[test]
    fn composition_is_associative() {
        let a = Transform::rotate(Vec3::new(12.0, 0.0, 40.0)).to_affine();
        let b = Transform::scale(Vec3::new(2.0, 0.5, 1.5)).to_affine();
        let c = Transform::translate(Vec3::new(1.0, 2.0, 3.0)).to_affine();
        let p = Vec3::new(0.7, 0.1, -0.4);
        let left = a.compose(&b).compose(&c).apply(p);
        let right = a.compose(&b.compose(&c)).apply(p);
        assert!(close(left, right));
    }

    #[test]
    fn ray_box_interval() {
        let b = Aabb {
            min: Vec3::new(-1.0, -1.0, -1.0),
            max: Vec3::new(1.0, 1.0, 1.0),
        };
        let inv = Vec3::new(f64::INFINITY, f64::INFINITY, 1.0);
        let (t0, t1) = b.ray_interval(Vec3::new(0.0, 0.0, -5.0), inv, 0.0).unwrap();
        assert!((t0 - 4.0).abs() < 1e-12 && (t1 - 6.0).abs() < 1e-12);
        assert!(b.ray_interval(Vec3::new(3.0, 0.0, -5.0), inv, 0.0).is_none());
    }
}
