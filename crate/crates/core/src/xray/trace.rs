//! Parity-ordered ray/mesh path lengths.
//!
//! Triangle hits use the watertight shear-space test (edges inclusive), so a
//! ray through a shared edge or vertex reports every incident triangle.
//! Coincident hits with the same facing are merged within a tolerance, then
//! the entry/exit sequence is walked; an inconsistent sequence triggers one
//! retry with a sub-pixel jitter.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::scene::TriMesh;

/// Relative merge tolerance for coincident hits, scaled by scene diameter.
pub const HIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
struct TraceTriangle {
    v: [Vec3; 3],
    normal: Vec3,
}

#[derive(Debug, Clone)]
pub struct TraceMesh {
    tris: Vec<TraceTriangle>,
    aabb: Aabb,
    pub mu: f64,
}

/// Immutable, render-ready set of closed meshes.
#[derive(Debug, Clone)]
pub struct Scene {
    meshes: Vec<TraceMesh>,
    tol: f64,
}

#[derive(Clone, Copy)]
struct Shear {
    kx: usize,
    ky: usize,
    kz: usize,
    sx: f64,
    sy: f64,
    sz: f64,
}

impl Shear {
    fn new(dir: Vec3) -> Option<Shear> {
        let a = [dir.x.abs(), dir.y.abs(), dir.z.abs()];
        let kz = if a[0] >= a[1] && a[0] >= a[2] {
            0
        } else if a[1] >= a[2] {
            1
        } else {
            2
        };
        if a[kz] == 0.0 {
            return None;
        }
        let mut kx = (kz + 1) % 3;
        let mut ky = (kx + 1) % 3;
        if dir[kz] < 0.0 {
            core::mem::swap(&mut kx, &mut ky);
        }
        Some(Shear {
            kx,
            ky,
            kz,
            sx: dir[kx] / dir[kz],
            sy: dir[ky] / dir[kz],
            sz: 1.0 / dir[kz],
        })
    }

    /// Ray parameter of the hit, if the ray meets the closed triangle.
    #[inline]
    fn intersect(&self, org: Vec3, v: &[Vec3; 3]) -> Option<f64> {
        let a = v[0] - org;
        let b = v[1] - org;
        let c = v[2] - org;
        let (kx, ky, kz) = (self.kx, self.ky, self.kz);
        let ax = a[kx] - self.sx * a[kz];
        let ay = a[ky] - self.sy * a[kz];
        let bx = b[kx] - self.sx * b[kz];
        let by = b[ky] - self.sy * b[kz];
        let cx = c[kx] - self.sx * c[kz];
        let cy = c[ky] - self.sy * c[kz];
        let u = cx * by - cy * bx;
        let vv = ax * cy - ay * cx;
        let w = bx * ay - by * ax;
        if (u < 0.0 || vv < 0.0 || w < 0.0) && (u > 0.0 || vv > 0.0 || w > 0.0) {
            return None;
        }
        let det = u + vv + w;
        if det == 0.0 {
            return None;
        }
        let t = (u * a[kz] + vv * b[kz] + w * c[kz]) * self.sz / det;
        (t > 0.0).then_some(t)
    }
}

impl TraceMesh {
    pub fn new(mesh: &TriMesh) -> Result<TraceMesh> {
        mesh.check_watertight()?;
        let tris = (0..mesh.triangles.len())
            .map(|i| {
                let v = mesh.triangle(i);
                TraceTriangle {
                    v,
                    normal: (v[1] - v[0]).cross(v[2] - v[0]),
                }
            })
            .collect();
        Ok(TraceMesh {
            tris,
            aabb: mesh.aabb(),
            mu: mesh.material.mu,
        })
    }

    /// Length of `origin + t * dir` inside the mesh, in units of `|dir|`
    /// (scaled by the caller). `None` when the entry/exit sequence is
    /// inconsistent.
    fn chord(&self, origin: Vec3, dir: Vec3, inv: Vec3, shear: &Shear, tol_t: f64) -> Option<f64> {
        if self.aabb.ray_interval(origin, inv, tol_t).is_none() {
            return Some(0.0);
        }
        let mut hits: Vec<(f64, i8)> = Vec::new();
        for tri in &self.tris {
            if let Some(t) = shear.intersect(origin, &tri.v) {
                let facing = dir.dot(tri.normal);
                if facing != 0.0 {
                    hits.push((t, if facing < 0.0 { 1 } else { -1 }));
                }
            }
        }
        walk_hits(&mut hits, tol_t)
    }
}

/// Sorts hits, merges same-facing hits closer than `tol_t` and sums the
/// inside intervals. Entries are `+1`, exits `-1`.
fn walk_hits(hits: &mut Vec<(f64, i8)>, tol_t: f64) -> Option<f64> {
    if hits.is_empty() {
        return Some(0.0);
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut merged: Vec<(f64, i8)> = Vec::with_capacity(hits.len());
    for &(t, s) in hits.iter() {
        let dup = merged
            .iter()
            .rev()
            .take_while(|(mt, _)| t - *mt <= tol_t)
            .any(|&(_, ms)| ms == s);
        if !dup {
            merged.push((t, s));
        }
    }
    // Zero-length touch (exit and entry at the same point) sorts as exit
    // first; reorder so entry precedes exit at equal t.
    merged.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    let mut depth = 0i32;
    let mut entered = 0.0;
    let mut len = 0.0;
    for (t, s) in merged {
        if s > 0 {
            if depth != 0 {
                return None;
            }
            depth = 1;
            entered = t;
        } else {
            if depth != 1 {
                return None;
            }
            depth = 0;
            len += t - entered;
        }
    }
    (depth == 0).then_some(len)
}

impl Scene {
    pub fn new(meshes: &[TriMesh]) -> Result<Scene> {
        let meshes: Vec<TraceMesh> = meshes.iter().map(TraceMesh::new).collect::<Result<_>>()?;
        let bounds = meshes
            .iter()
            .fold(Aabb::empty(), |acc, m| acc.union(&m.aabb));
        let diameter = if meshes.is_empty() {
            1.0
        } else {
            bounds.diagonal()
        };
        Ok(Scene {
            meshes,
            tol: HIT_TOLERANCE * diameter,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.meshes.is_empty()
    }

    pub fn meshes(&self) -> &[TraceMesh] {
        &self.meshes
    }

    fn try_lengths(&self, origin: Vec3, dir: Vec3, out: &mut [f64]) -> bool {
        let Some(shear) = Shear::new(dir) else {
            return false;
        };
        let dn = dir.norm();
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let tol_t = self.tol / dn;
        for (m, slot) in self.meshes.iter().zip(out.iter_mut()) {
            match m.chord(origin, dir, inv, &shear, tol_t) {
                Some(l) => *slot = l * dn,
                None => return false,
            }
        }
        true
    }

    /// Per-mesh path lengths (mm) along the ray. On a degenerate hit
    /// sequence the ray is shifted sideways by `jitter` mm and traced once
    /// more.
    pub fn path_lengths(&self, origin: Vec3, dir: Vec3, jitter: f64) -> Result<Vec<f64>> {
        let mut out = alloc::vec![0.0; self.meshes.len()];
        self.path_lengths_into(origin, dir, jitter, &mut out)?;
        Ok(out)
    }

    pub fn path_lengths_into(
        &self,
        origin: Vec3,
        dir: Vec3,
        jitter: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if dir.norm() == 0.0 || !dir.is_finite() {
            return Err(crate::error::invalid("ray direction must be nonzero"));
        }
        if self.try_lengths(origin, dir, out) {
            return Ok(());
        }
        let side = perpendicular(dir);
        if self.try_lengths(origin + side * jitter, dir, out) {
            return Ok(());
        }
        Err(Error::DegenerateHit)
    }

    /// `sum(mu_m * L_m)` along the ray.
    pub fn line_integral(&self, origin: Vec3, dir: Vec3, jitter: f64) -> Result<f64> {
        let mut buf = [0.0f64; 16];
        let n = self.meshes.len();
        if n <= buf.len() {
            self.path_lengths_into(origin, dir, jitter, &mut buf[..n])?;
            Ok(self.meshes.iter().zip(&buf[..n]).map(|(m, l)| m.mu * l).sum())
        } else {
            let l = self.path_lengths(origin, dir, jitter)?;
            Ok(self.meshes.iter().zip(&l).map(|(m, l)| m.mu * l).sum())
        }
    }
}

fn perpendicular(d: Vec3) -> Vec3 {
    let a = [d.x.abs(), d.y.abs(), d.z.abs()];
    let axis = if a[0] <= a[1] && a[0] <= a[2] {
        Vec3::new(1.0, 0.0, 0.0)
    } else if a[1] <= a[2] {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        Vec3::new(0.0, 0.0, 1.0)
    };
    let p = d.cross(axis).normalized();
    // tilt off the axis planes as well
    (p + d.cross(p).normalized() * 0.618_034).normalized()
}

/// Per-mesh path lengths (mm) of the ray `origin + t * direction`, `t > 0`.
pub fn ray_path_lengths(origin: Vec3, direction: Vec3, meshes: &[TriMesh]) -> Result<Vec<f64>> {
    let scene = Scene::new(meshes)?;
    scene.path_lengths(origin, direction, 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Transform;
    use crate::scene::{decompose, tessellate, CsgNode, Material};
    use alloc::vec;

    fn slab() -> TriMesh {
        tessellate(&CsgNode::cuboid(Vec3::new(20.0, 20.0, 4.0), true), &Material::aluminum()).unwrap()
    }

    #[test]
    fn normal_ray_through_slab() {
        let l = ray_path_lengths(Vec3::new(0.3, 0.2, -10.0), Vec3::new(0.0, 0.0, 1.0), &[slab()]).unwrap();
        assert!((l[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn ray_through_shared_edge_and_vertex() {
        // through the box diagonal edge of the top/bottom faces
        let l = ray_path_lengths(Vec3::new(0.0, 0.0, -10.0), Vec3::new(0.0, 0.0, 1.0), &[slab()]).unwrap();
        assert!((l[0] - 4.0).abs() < 1e-12);
        // grazing the side face
        let l = ray_path_lengths(Vec3::new(10.0, 0.0, -10.0), Vec3::new(0.0, 0.0, 1.0), &[slab()]).unwrap();
        assert!(l[0] == 0.0 || (l[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn pore_chord_along_pole_axis_is_exact() {
        let node = CsgNode::difference(vec![
            CsgNode::cuboid(Vec3::new(20.0, 20.0, 4.0), true),
            CsgNode::union(vec![CsgNode::sphere(0.5, 20)]),
        ]);
        let meshes = decompose(&node, &Material::aluminum(), &Material::air()).unwrap();
        let l = ray_path_lengths(Vec3::new(0.0, 0.0, -10.0), Vec3::new(0.0, 0.0, 1.0), &meshes).unwrap();
        assert!((l[0] - 4.0).abs() < 1e-12);
        assert!((l[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn miss_gives_zero() {
        let l = ray_path_lengths(Vec3::new(50.0, 0.0, -10.0), Vec3::new(0.0, 0.0, 1.0), &[slab()]).unwrap();
        assert_eq!(l, vec![0.0]);
    }

    #[test]
    fn oblique_ray_through_slab() {
        let d = Vec3::new(1.0, 0.5, 2.0);
        let l = ray_path_lengths(Vec3::new(-3.0, -1.5, -6.0) + Vec3::new(0.01, 0.0, 0.0), d, &[slab()]).unwrap();
        let expected = 4.0 * d.norm() / d.z;
        assert!((l[0] - expected).abs() < 1e-9);
    }

    #[test]
    fn rotated_box_chord() {
        let m = tessellate(
            &CsgNode::cuboid(Vec3::new(2.0, 2.0, 2.0), true)
                .transformed(Transform::rotate(Vec3::new(0.0, 0.0, 45.0))),
            &Material::aluminum(),
        )
        .unwrap();
        // along x through the center: diagonal of the square
        let l = ray_path_lengths(Vec3::new(-5.0, 0.0, 0.1), Vec3::new(1.0, 0.0, 0.0), &[m]).unwrap();
        assert!((l[0] - 2.0 * core::f64::consts::SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn walk_rejects_double_entry() {
        let mut h = vec![(1.0, 1i8), (2.0, 1), (3.0, -1)];
        assert!(walk_hits(&mut h, 1e-9).is_none());
        let mut h = vec![(1.0, 1i8), (1.0, 1), (3.0, -1)];
        assert_eq!(walk_hits(&mut h, 1e-9), Some(2.0));
        let mut h = vec![(1.0, -1i8), (1.0, 1)];
        assert_eq!(walk_hits(&mut h, 1e-9), Some(0.0));
    }
}
