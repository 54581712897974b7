use alloc::string::String;
use alloc::vec::Vec;

use super::{CsgNode, Material, Primitive, TriMesh};
use crate::error::{Error, Result};
use crate::geom::{Affine, Vec3};
use crate::math::{cos, sin, PI};

/// Tessellates a CSG tree made of primitives and transforms only.
///
/// Spheres become UV spheres with `segments` meridians and `segments / 2`
/// latitude bands. The two poles sit exactly on the sphere and the ring
/// vertices are pushed out radially so the mesh encloses the analytic sphere
/// volume; see [`sphere_ring_radius`].
pub fn tessellate(node: &CsgNode, material: &Material) -> Result<TriMesh> {
    node.validate()?;
    let mut path = String::from("root");
    tessellate_at(node, material, &Affine::IDENTITY, &mut path)
}

fn tessellate_at(
    node: &CsgNode,
    material: &Material,
    outer: &Affine,
    path: &mut String,
) -> Result<TriMesh> {
    match node {
        CsgNode::Primitive(p) => Ok(primitive_mesh(p, material).transformed(outer)),
        CsgNode::Transformed { transform, child } => {
            let t = outer.compose(&transform.to_affine());
            path.push_str("/transformed");
            tessellate_at(child, material, &t, path)
        }
        CsgNode::Boolean { op, .. } => {
            path.push_str(&alloc::format!("/{op:?}").to_lowercase());
            Err(Error::UnsupportedConstruct { path: path.clone() })
        }
    }
}

fn primitive_mesh(p: &Primitive, material: &Material) -> TriMesh {
    match *p {
        Primitive::Sphere { radius, segments } => uv_sphere(radius, segments, material),
        Primitive::Cuboid { size, centered } => cuboid(size, centered, material),
    }
}

fn cuboid(size: Vec3, centered: bool, material: &Material) -> TriMesh {
    let lo = if centered { size * -0.5 } else { Vec3::ZERO };
    let vertices = (0..8u32)
        .map(|i| {
            Vec3::new(
                lo.x + if i & 1 != 0 { size.x } else { 0.0 },
                lo.y + if i & 2 != 0 { size.y } else { 0.0 },
                lo.z + if i & 4 != 0 { size.z } else { 0.0 },
            )
        })
        .collect();
    let triangles = alloc::vec![
        [0, 2, 3],
        [0, 3, 1],
        [4, 5, 7],
        [4, 7, 6],
        [0, 1, 5],
        [0, 5, 4],
        [2, 6, 7],
        [2, 7, 3],
        [0, 4, 6],
        [0, 6, 2],
        [1, 3, 7],
        [1, 7, 5],
    ];
    TriMesh::new(vertices, triangles, material.clone())
}

fn bands(segments: u32) -> u32 {
    (segments / 2).max(3)
}

fn unit_sphere_topology(segments: u32, ring_radius: f64) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let n = segments;
    let bands = bands(segments);
    let rings = bands - 1;
    let mut v = Vec::with_capacity((2 + rings * n) as usize);
    v.push(Vec3::new(0.0, 0.0, 1.0));
    for i in 1..bands {
        let phi = PI * i as f64 / bands as f64;
        for k in 0..n {
            let th = 2.0 * PI * k as f64 / n as f64;
            v.push(Vec3::new(sin(phi) * cos(th), sin(phi) * sin(th), cos(phi)) * ring_radius);
        }
    }
    v.push(Vec3::new(0.0, 0.0, -1.0));
    let south = v.len() as u32 - 1;
    let ring = |i: u32, k: u32| 1 + i * n + (k % n);
    let mut t = Vec::with_capacity((2 * n * rings) as usize);
    for k in 0..n {
        t.push([0, ring(0, k), ring(0, k + 1)]);
    }
    for i in 0..rings - 1 {
        for k in 0..n {
            let (a, b) = (ring(i, k), ring(i, k + 1));
            let (c, d) = (ring(i + 1, k), ring(i + 1, k + 1));
            t.push([a, c, b]);
            t.push([b, c, d]);
        }
    }
    for k in 0..n {
        t.push([south, ring(rings - 1, k + 1), ring(rings - 1, k)]);
    }
    (v, t)
}

/// Radius of the latitude rings of a unit UV sphere with pinned poles such
/// that the mesh volume equals 4π/3.
///
/// Pole-fan tetrahedra scale with ρ², band tetrahedra with ρ³, so the
/// volume is `A ρ² + B ρ³`; solved by Newton iteration from ρ = 1.
pub fn sphere_ring_radius(segments: u32) -> f64 {
    let (v, t) = unit_sphere_topology(segments, 1.0);
    let n = segments as usize;
    let (mut cap, mut band) = (0.0, 0.0);
    for (i, &[a, b, c]) in t.iter().enumerate() {
        let vol = v[a as usize].dot(v[b as usize].cross(v[c as usize])) / 6.0;
        if i < n || i >= t.len() - n {
            cap += vol;
        } else {
            band += vol;
        }
    }
    let target = 4.0 * PI / 3.0;
    let mut rho = 1.0;
    for _ in 0..50 {
        let f = cap * rho * rho + band * rho * rho * rho - target;
        let df = 2.0 * cap * rho + 3.0 * band * rho * rho;
        let step = f / df;
        rho -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    rho
}

fn uv_sphere(radius: f64, segments: u32, material: &Material) -> TriMesh {
    let (v, t) = unit_sphere_topology(segments, sphere_ring_radius(segments));
    let v = v.into_iter().map(|p| p * radius).collect();
    TriMesh::new(v, t, material.clone())
}
