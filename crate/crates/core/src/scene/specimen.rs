//! Specimen descriptions (the ground truth) and their Monte Carlo generators.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{decompose, CsgNode, Material, TriMesh};
use crate::error::{ensure, invalid, Error, Result};
use crate::geom::{Mat3, Transform, Vec3};
use crate::math::{cos, deg_to_rad, sin, sqrt};
use crate::rng;

pub const SPEC_SCHEMA_VERSION: u32 = 1;

/// Rejection-sampling attempts per pore before giving up.
pub const PORE_RETRY_BUDGET: usize = 100;

/// One ellipsoidal pore: a sphere of `base_radius`, scaled per axis, rotated
/// about z, then translated to `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoreSpec {
    pub center: Vec3,
    pub base_radius: f64,
    pub scale: Vec3,
    pub rotation_z_deg: f64,
}

impl PoreSpec {
    pub fn semi_axes(&self) -> Vec3 {
        self.scale * self.base_radius
    }

    pub fn rotation(&self) -> Mat3 {
        Mat3::rot_z(self.rotation_z_deg)
    }

    /// Half extents of the axis-aligned box around the ellipsoid.
    pub fn half_extents(&self) -> Vec3 {
        let s = self.semi_axes();
        let (sn, cs) = (
            sin(deg_to_rad(self.rotation_z_deg)),
            cos(deg_to_rad(self.rotation_z_deg)),
        );
        Vec3::new(
            sqrt((s.x * cs) * (s.x * cs) + (s.y * sn) * (s.y * sn)),
            sqrt((s.x * sn) * (s.x * sn) + (s.y * cs) * (s.y * cs)),
            s.z,
        )
    }

    pub fn bounding_radius(&self) -> f64 {
        let s = self.semi_axes();
        s.x.max(s.y).max(s.z)
    }

    /// Implicit function: `< 1` inside, `1` on the surface.
    pub fn implicit(&self, p: Vec3) -> f64 {
        let q = self.rotation().transpose().apply(p - self.center);
        let s = self.semi_axes();
        let u = Vec3::new(q.x / s.x, q.y / s.y, q.z / s.z);
        u.dot(u)
    }

    /// Whether the ray `origin + t * dir` (any `t`) passes through the
    /// ellipsoid interior.
    pub fn ray_hits(&self, origin: Vec3, dir: Vec3) -> bool {
        let rt = self.rotation().transpose();
        let s = self.semi_axes();
        let o = rt.apply(origin - self.center);
        let d = rt.apply(dir);
        let o = Vec3::new(o.x / s.x, o.y / s.y, o.z / s.z);
        let d = Vec3::new(d.x / s.x, d.y / s.y, d.z / s.z);
        // |o + t d|^2 = 1 has two real roots with t > 0 for some root.
        let a = d.dot(d);
        let b = o.dot(d);
        let c = o.dot(o) - 1.0;
        let disc = b * b - a * c;
        if disc <= 0.0 {
            return false;
        }
        let t_far = (-b + sqrt(disc)) / a;
        t_far > 0.0
    }

    pub fn to_csg(&self, segments: u32) -> CsgNode {
        CsgNode::sphere(self.base_radius, segments)
            .transformed(Transform::scale(self.scale))
            .transformed(Transform::rotate(Vec3::new(0.0, 0.0, self.rotation_z_deg)))
            .transformed(Transform::translate(self.center))
    }
}

/// Closed interval; `min == max` is a fixed value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Range { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Range { min: v, max: v }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min && v <= self.max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoreCount {
    Fixed(usize),
    /// Poisson-distributed, truncated to at least one pore.
    Poisson { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PorePlateParams {
    /// Plate size in mm; z is the thickness (beam) direction.
    pub size: Vec3,
    pub count: PoreCount,
    pub base_radius: Range,
    /// Per-axis scale factor range.
    pub scale: Range,
    pub rotation_deg: Range,
    /// Minimum clearance between a pore's bounding box and the plate faces.
    pub margin: f64,
    pub segments: u32,
    pub host: Material,
    pub pore_material: Material,
}

impl Default for PorePlateParams {
    fn default() -> Self {
        PorePlateParams {
            size: Vec3::new(100.0, 40.0, 4.0),
            count: PoreCount::Poisson { lambda: 100.0 },
            base_radius: Range::fixed(0.5),
            scale: Range::new(0.5, 2.1),
            rotation_deg: Range::new(-90.0, 90.0),
            margin: 0.2,
            segments: 20,
            host: Material::aluminum(),
            pore_material: Material::air(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub material: Material,
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SpecimenKind {
    PorePlate {
        size: Vec3,
        host: Material,
        pore_material: Material,
        segments: u32,
    },
    FmlStack {
        /// x and y extent in mm.
        footprint: [f64; 2],
        /// Bottom (most negative z) layer first.
        layers: Vec<Layer>,
    },
}

/// Declarative specimen: geometry, materials and the defect list. Centered
/// on the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecimenSpec {
    pub schema_version: u32,
    pub kind: SpecimenKind,
    pub defects: Vec<PoreSpec>,
    pub rng_seed: u64,
    /// Generator parameters, when the spec came from [`generate_pore_plate`].
    pub generator: Option<PorePlateParams>,
}

impl SpecimenSpec {
    pub fn is_defect_free(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn to_csg(&self) -> CsgNode {
        match &self.kind {
            SpecimenKind::PorePlate { size, segments, .. } => {
                let pores = self.defects.iter().map(|p| p.to_csg(*segments)).collect();
                CsgNode::difference(alloc::vec![
                    CsgNode::cuboid(*size, true),
                    CsgNode::union(pores)
                ])
            }
            SpecimenKind::FmlStack { footprint, layers } => {
                let total: f64 = layers.iter().map(|l| l.thickness).sum();
                let mut z = -total / 2.0;
                let mut parts = Vec::with_capacity(layers.len());
                for l in layers {
                    parts.push(
                        CsgNode::cuboid(Vec3::new(footprint[0], footprint[1], l.thickness), false)
                            .transformed(Transform::translate(Vec3::new(
                                -footprint[0] / 2.0,
                                -footprint[1] / 2.0,
                                z,
                            ))),
                    );
                    z += l.thickness;
                }
                CsgNode::union(parts)
            }
        }
    }

    /// Decomposed single-density meshes ready for the projector.
    pub fn meshes(&self) -> Result<Vec<TriMesh>> {
        match &self.kind {
            SpecimenKind::PorePlate {
                host,
                pore_material,
                ..
            } => decompose(&self.to_csg(), host, pore_material),
            SpecimenKind::FmlStack { footprint, layers } => {
                ensure!(
                    self.defects.is_empty(),
                    invalid("defects inside laminate stacks are not supported")
                );
                let total: f64 = layers.iter().map(|l| l.thickness).sum();
                let (hx, hy) = (footprint[0] / 2.0, footprint[1] / 2.0);
                let mut z = -total / 2.0;
                let mut out = Vec::with_capacity(layers.len());
                for l in layers {
                    let top = z + l.thickness;
                    out.push(box_between(
                        Vec3::new(-hx, -hy, z),
                        Vec3::new(hx, hy, top),
                        &l.material,
                    ));
                    z = top;
                }
                Ok(out)
            }
        }
    }

    /// Total extent along z (plate thickness or stack height).
    pub fn thickness(&self) -> f64 {
        match &self.kind {
            SpecimenKind::PorePlate { size, .. } => size.z,
            SpecimenKind::FmlStack { layers, .. } => layers.iter().map(|l| l.thickness).sum(),
        }
    }
}

fn box_between(lo: Vec3, hi: Vec3, material: &Material) -> TriMesh {
    let mut m = super::tessellate(&CsgNode::cuboid(Vec3::ONE, false), material)
        .expect("unit cuboid is valid");
    for v in &mut m.vertices {
        *v = Vec3::new(
            if v.x > 0.5 { hi.x } else { lo.x },
            if v.y > 0.5 { hi.y } else { lo.y },
            if v.z > 0.5 { hi.z } else { lo.z },
        );
    }
    m
}

/// Monte Carlo pore plate.
///
/// Pores are drawn one at a time by rejection sampling: a candidate is kept
/// when its bounding box clears the plate faces by `margin` and its bounding
/// sphere does not touch any earlier pore's bounding sphere.
pub fn generate_pore_plate(params: &PorePlateParams, seed: u64) -> Result<SpecimenSpec> {
    let half = params.size * 0.5;
    ensure!(
        params.size.x > 0.0 && params.size.y > 0.0 && params.size.z > 0.0,
        invalid("plate size must be positive")
    );
    ensure!(params.margin >= 0.0, invalid("margin must be >= 0"));
    ensure!(
        half.x > params.margin && half.y > params.margin && half.z > params.margin,
        invalid("margin leaves no interior volume")
    );
    ensure!(
        params.base_radius.min > 0.0 && params.base_radius.max >= params.base_radius.min,
        invalid("base radius range must be positive")
    );
    ensure!(
        params.scale.min > 0.0 && params.scale.max >= params.scale.min,
        invalid("scale range must be positive")
    );
    ensure!(
        params.rotation_deg.max >= params.rotation_deg.min,
        invalid("rotation range is empty")
    );
    ensure!(params.segments >= 6, invalid("segments must be >= 6"));

    let mut rng = rng::seeded(seed);
    let count = match params.count {
        PoreCount::Fixed(n) => n,
        PoreCount::Poisson { lambda } => {
            let dist = Poisson::new(lambda)
                .map_err(|_| invalid(format!("invalid Poisson rate {lambda}")))?;
            (dist.sample(&mut rng) as usize).max(1)
        }
    };

    let mut pores: Vec<PoreSpec> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = false;
        for _ in 0..PORE_RETRY_BUDGET {
            let base_radius = params.base_radius.sample(&mut rng);
            let scale = Vec3::new(
                params.scale.sample(&mut rng),
                params.scale.sample(&mut rng),
                params.scale.sample(&mut rng),
            );
            let rotation_z_deg = params.rotation_deg.sample(&mut rng);
            let mut pore = PoreSpec {
                center: Vec3::ZERO,
                base_radius,
                scale,
                rotation_z_deg,
            };
            let room = half - pore.half_extents() - Vec3::splat(params.margin);
            // Draw the center even when there is no room so the stream
            // advances identically on every attempt.
            let u = Vec3::new(
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
                rng.random_range(-1.0..=1.0),
            );
            if room.x <= 0.0 || room.y <= 0.0 || room.z <= 0.0 {
                continue;
            }
            pore.center = u.mul_elem(room);
            let r = pore.bounding_radius();
            if pores
                .iter()
                .all(|q| (q.center - pore.center).norm() > r + q.bounding_radius())
            {
                pores.push(pore);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PackingFailure {
                achieved: pores.len(),
                requested: count,
            });
        }
    }

    Ok(SpecimenSpec {
        schema_version: SPEC_SCHEMA_VERSION,
        kind: SpecimenKind::PorePlate {
            size: params.size,
            host: params.host.clone(),
            pore_material: params.pore_material.clone(),
            segments: params.segments,
        },
        defects: pores,
        rng_seed: seed,
        generator: Some(params.clone()),
    })
}

/// Flat laminate of boxes stacked along z, centered on the origin.
pub fn generate_fml_stack(footprint: [f64; 2], layers: &[Layer]) -> Result<SpecimenSpec> {
    ensure!(!layers.is_empty(), invalid("laminate needs at least one layer"));
    ensure!(
        footprint[0] > 0.0 && footprint[1] > 0.0,
        invalid("laminate footprint must be positive")
    );
    for (i, l) in layers.iter().enumerate() {
        ensure!(
            l.thickness > 0.0,
            invalid(format!("layer {i} thickness {} must be > 0", l.thickness))
        );
    }
    Ok(SpecimenSpec {
        schema_version: SPEC_SCHEMA_VERSION,
        kind: SpecimenKind::FmlStack {
            footprint,
            layers: layers.to_vec(),
        },
        defects: Vec::new(),
        rng_seed: 0,
        generator: None,
    })
}

/// Five-layer aluminum/prepreg laminate, 0.4 mm metal sheets and 0.25 mm
/// prepreg, in the style of GLARE grades.
pub fn glare_layers() -> Vec<Layer> {
    let al = Layer {
        material: Material::aluminum(),
        thickness: 0.4,
    };
    let pp = Layer {
        material: Material::prepreg(),
        thickness: 0.25,
    };
    alloc::vec![al.clone(), pp.clone(), al.clone(), pp, al]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_count_plate_is_reproducible() {
        let params = PorePlateParams {
            count: PoreCount::Fixed(100),
            ..Default::default()
        };
        let a = generate_pore_plate(&params, 11).unwrap();
        let b = generate_pore_plate(&params, 11).unwrap();
        assert_eq!(a.defects.len(), 100);
        assert_eq!(a, b);
        let c = generate_pore_plate(&params, 12).unwrap();
        assert_ne!(a.defects, c.defects);
    }

    #[test]
    fn zero_count_plate_is_defect_free() {
        let params = PorePlateParams {
            count: PoreCount::Fixed(0),
            ..Default::default()
        };
        let spec = generate_pore_plate(&params, 1).unwrap();
        assert!(spec.is_defect_free());
        assert_eq!(spec.meshes().unwrap().len(), 1);
    }

    #[test]
    fn poisson_count_is_at_least_one() {
        let params = PorePlateParams {
            count: PoreCount::Poisson { lambda: 0.01 },
            ..Default::default()
        };
        for seed in 0..20 {
            assert!(!generate_pore_plate(&params, seed).unwrap().defects.is_empty());
        }
    }

    #[test]
    fn samples_stay_within_configured_bounds() {
        let params = PorePlateParams {
            count: PoreCount::Fixed(60),
            scale: Range::new(0.49, 2.11),
            ..Default::default()
        };
        let spec = generate_pore_plate(&params, 5).unwrap();
        for p in &spec.defects {
            for s in [p.scale.x, p.scale.y, p.scale.z] {
                assert!(params.scale.contains(s));
            }
            assert!(params.rotation_deg.contains(p.rotation_z_deg));
            assert_eq!(p.base_radius, 0.5);
        }
    }

    #[test]
    fn overfull_plate_reports_packing_failure() {
        let params = PorePlateParams {
            size: Vec3::new(6.0, 6.0, 4.0),
            count: PoreCount::Fixed(200),
            ..Default::default()
        };
        match generate_pore_plate(&params, 3) {
            Err(Error::PackingFailure {
                achieved,
                requested,
            }) => {
                assert_eq!(requested, 200);
                assert!(achieved > 0 && achieved < 200);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn margin_must_leave_room() {
        let params = PorePlateParams {
            margin: 2.0,
            ..Default::default()
        };
        assert!(generate_pore_plate(&params, 0).is_err());
    }

    #[test]
    fn glare_stack_shares_interfaces() {
        let spec = generate_fml_stack([20.0, 20.0], &glare_layers()).unwrap();
        let meshes = spec.meshes().unwrap();
        assert_eq!(meshes.len(), 5);
        let total: f64 = glare_layers().iter().map(|l| l.thickness).sum();
        assert!((spec.thickness() - total).abs() < 1e-12);
        for w in meshes.windows(2) {
            let top = w[0].aabb().max.z;
            let bottom = w[1].aabb().min.z;
            assert_eq!(top, bottom);
        }
        let lo = meshes[0].aabb().min.z;
        let hi = meshes[4].aabb().max.z;
        assert!((hi - lo - total).abs() < 1e-12);
    }

    #[test]
    fn single_layer_equals_plain_plate() {
        let layer = Layer {
            material: Material::aluminum(),
            thickness: 4.0,
        };
        let spec = generate_fml_stack([100.0, 40.0], &[layer]).unwrap();
        let m = &spec.meshes().unwrap()[0];
        assert!((m.volume().unwrap() - 16000.0).abs() < 1e-9);
        let b = m.aabb();
        assert_eq!(b.min, Vec3::new(-50.0, -20.0, -2.0));
        assert_eq!(b.max, Vec3::new(50.0, 20.0, 2.0));
    }

    #[test]
    fn nonpositive_layer_rejected() {
        let layer = Layer {
            material: Material::aluminum(),
            thickness: 0.0,
        };
        assert!(generate_fml_stack([1.0, 1.0], &[layer]).is_err());
    }

    #[test]
    fn ellipsoid_ray_test() {
        let p = PoreSpec {
            center: Vec3::new(1.0, 0.0, 0.0),
            base_radius: 0.5,
            scale: Vec3::new(2.0, 1.0, 1.0),
            rotation_z_deg: 90.0,
        };
        // rotated 90 deg: long axis (1.0) along y
        let d = Vec3::new(0.0, 0.0, 1.0);
        assert!(p.ray_hits(Vec3::new(1.0, 0.9, -5.0), d));
        assert!(!p.ray_hits(Vec3::new(1.6, 0.0, -5.0), d));
        assert!(!p.ray_hits(Vec3::new(1.0, 0.0, 5.0), d));
        let e = p.half_extents();
        assert!((e.x - 0.5).abs() < 1e-12 && (e.y - 1.0).abs() < 1e-12);
    }
}
