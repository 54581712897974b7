use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::Material;
use crate::error::{Error, Result};
use crate::geom::{Aabb, Affine, Vec3};

/// Closed triangle surface of one homogeneous body. Triangles are wound
/// counter-clockwise when viewed from outside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub material: Material,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, material: Material) -> Self {
        TriMesh {
            vertices,
            triangles,
            material,
        }
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Applies `t` to every vertex. A mirroring transform flips the winding
    /// so normals keep pointing outward.
    pub fn transformed(&self, t: &Affine) -> TriMesh {
        let vertices = self.vertices.iter().map(|&v| t.apply(v)).collect();
        let triangles = if t.linear.det() < 0.0 {
            self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect()
        } else {
            self.triangles.clone()
        };
        TriMesh {
            vertices,
            triangles,
            material: self.material.clone(),
        }
    }

    /// Verifies that every undirected edge is shared by exactly two
    /// triangles traversing it in opposite directions.
    pub fn check_watertight(&self) -> Result<()> {
        // (lo, hi) -> (uses as lo->hi, uses as hi->lo)
        let mut edges: BTreeMap<(u32, u32), (u32, u32)> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = edges.entry((a.min(b), a.max(b))).or_insert((0, 0));
                if a < b {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        let bad: Vec<(u32, u32)> = edges
            .into_iter()
            .filter(|(_, uses)| *uses != (1, 1))
            .map(|(e, _)| e)
            .collect();
        if bad.is_empty() && !self.triangles.is_empty() {
            Ok(())
        } else {
            Err(Error::Topology {
                boundary_edges: bad,
            })
        }
    }

    /// Signed volume by the divergence theorem, without a topology check.
    pub fn signed_volume_unchecked(&self) -> f64 {
        // Tetrahedra against the first vertex keep magnitudes small for
        // meshes far from the origin.
        let o = self.vertices.first().copied().unwrap_or(Vec3::ZERO);
        self.triangles
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (
                    self.vertices[a as usize] - o,
                    self.vertices[b as usize] - o,
                    self.vertices[c as usize] - o,
                );
                a.dot(b.cross(c))
            })
            .sum::<f64>()
            / 6.0
    }

    /// Enclosed volume in mm³; positive for outward winding.
    pub fn volume(&self) -> Result<f64> {
        self.check_watertight()?;
        Ok(self.signed_volume_unchecked())
    }

    /// True when `p` is strictly inside the mesh by more than `tol`, assuming
    /// the mesh is convex.
    pub fn convex_contains(&self, p: Vec3, tol: f64) -> bool {
        self.triangles.iter().all(|&[a, b, c]| {
            let (a, b, c) = (
                self.vertices[a as usize],
                self.vertices[b as usize],
                self.vertices[c as usize],
            );
            let n = (b - a).cross(c - a);
            let len = n.norm();
            len == 0.0 || n.dot(p - a) / len < -tol
        })
    }
}

/// `mesh_volume` as a free function.
pub fn mesh_volume(mesh: &TriMesh) -> Result<f64> {
    mesh.volume()
}
