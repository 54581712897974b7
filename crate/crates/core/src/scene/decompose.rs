use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{BooleanOp, CsgNode, Material, TriMesh};
use crate::error::{Error, Result};
use crate::geom::Affine;

/// Splits a multi-material CSG tree into single-density meshes whose
/// attenuations add up along any ray.
///
/// Supported shape: optional transforms around
/// `difference(host, union(enclosed...), ...)`, where the host and every
/// enclosed body are primitive/transform trees and each enclosed body lies
/// strictly inside the (convex) host. The host keeps `host_material`; each
/// enclosed body gets `inner.mu - host.mu`. Enclosed bodies must be mutually
/// disjoint; that is not checked here.
pub fn decompose(node: &CsgNode, host: &Material, inner: &Material) -> Result<Vec<TriMesh>> {
    node.validate()?;
    let mut outer = Affine::IDENTITY;
    let mut path = String::from("root");
    let mut cur = node;
    while let CsgNode::Transformed { transform, child } = cur {
        outer = outer.compose(&transform.to_affine());
        path.push_str("/transformed");
        cur = child;
    }

    let (host_node, enclosed) = match cur {
        CsgNode::Boolean {
            op: BooleanOp::Difference,
            children,
        } if !children.is_empty() => {
            path.push_str("/difference");
            let mut enclosed = Vec::new();
            for (i, c) in children[1..].iter().enumerate() {
                collect_enclosed(c, &mut enclosed, &format!("{path}/child[{}]", i + 1))?;
            }
            (&children[0], enclosed)
        }
        CsgNode::Boolean { op, .. } => {
            return Err(Error::UnsupportedConstruct {
                path: format!("{path}/{op:?}").to_lowercase(),
            })
        }
        other => (other, Vec::new()),
    };
    if host_node.contains_boolean() {
        return Err(Error::UnsupportedConstruct {
            path: format!("{path}/child[0]"),
        });
    }

    let host_mesh = super::tessellate(host_node, host)?.transformed(&outer);
    let tol = 1e-9 * host_mesh.aabb().diagonal();
    let effective = inner.nested_in(host);
    let mut out = Vec::with_capacity(1 + enclosed.len());
    out.push(host_mesh);
    for (i, body) in enclosed.into_iter().enumerate() {
        let mesh = super::tessellate(body, &effective)?.transformed(&outer);
        if !mesh.vertices.iter().all(|&v| out[0].convex_contains(v, tol)) {
            return Err(Error::ContainmentViolation { body: i });
        }
        out.push(mesh);
    }
    Ok(out)
}

fn collect_enclosed<'a>(node: &'a CsgNode, out: &mut Vec<&'a CsgNode>, path: &str) -> Result<()> {
    match node {
        CsgNode::Boolean {
            op: BooleanOp::Union,
            children,
        } => {
            for (i, c) in children.iter().enumerate() {
                if c.contains_boolean() {
                    return Err(Error::UnsupportedConstruct {
                        path: format!("{path}/union/child[{i}]"),
                    });
                }
                out.push(c);
            }
            Ok(())
        }
        n if !n.contains_boolean() => {
            out.push(n);
            Ok(())
        }
        _ => Err(Error::UnsupportedConstruct {
            path: String::from(path),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Transform, Vec3};
    use alloc::vec;

    fn pore(t: [f64; 3], rz: f64, s: [f64; 3]) -> CsgNode {
        CsgNode::sphere(0.5, 20)
            .transformed(Transform::scale(s.into()))
            .transformed(Transform::rotate(Vec3::new(0.0, 0.0, rz)))
            .transformed(Transform::translate(t.into()))
    }

    /// The three pores spelled out in the plate template, in the frame where
    /// the plate is 100 x 40 x 4 mm.
    fn template_plate() -> CsgNode {
        CsgNode::difference(vec![
            CsgNode::cuboid(Vec3::new(100.0, 4.0, 40.0), true)
                .transformed(Transform::rotate(Vec3::new(90.0, 0.0, 0.0))),
            CsgNode::union(vec![
                pore([9.24, 2.06, -0.97], -1.88, [0.96, 0.86, 1.31]),
                pore([3.15, -11.02, -0.55], -7.34, [1.18, 1.67, 0.68]),
                pore([-5.65, 6.79, 0.93], 64.48, [0.86, 2.11, 0.49]),
            ]),
        ])
        .transformed(Transform::rotate(Vec3::new(90.0, 90.0, 90.0)))
    }

    #[test]
    fn template_plate_gives_host_and_three_pores() {
        let al = Material::aluminum();
        let meshes = decompose(&template_plate(), &al, &Material::air()).unwrap();
        assert_eq!(meshes.len(), 4);
        assert_eq!(meshes[0].material, al);
        for m in &meshes[1..] {
            assert!((m.material.mu - (Material::air().mu - al.mu)).abs() < 1e-15);
            m.check_watertight().unwrap();
        }
        assert!((meshes[0].volume().unwrap() - 16000.0).abs() < 1e-6);
    }

    #[test]
    fn empty_union_gives_host_only() {
        let node = CsgNode::difference(vec![
            CsgNode::cuboid(Vec3::new(10.0, 10.0, 4.0), true),
            CsgNode::union(vec![]),
        ]);
        let meshes = decompose(&node, &Material::aluminum(), &Material::air()).unwrap();
        assert_eq!(meshes.len(), 1);
    }

    #[test]
    fn pore_on_plate_face_violates_containment() {
        let node = CsgNode::difference(vec![
            CsgNode::cuboid(Vec3::new(10.0, 10.0, 4.0), true),
            CsgNode::union(vec![pore([0.0, 0.0, 2.0], 0.0, [1.0, 1.0, 1.0])]),
        ]);
        assert_eq!(
            decompose(&node, &Material::aluminum(), &Material::air()),
            Err(Error::ContainmentViolation { body: 0 })
        );
    }

    #[test]
    fn nested_boolean_is_unsupported() {
        let node = CsgNode::difference(vec![
            CsgNode::cuboid(Vec3::new(10.0, 10.0, 4.0), true),
            CsgNode::union(vec![CsgNode::difference(vec![CsgNode::sphere(1.0, 8)])]),
        ]);
        assert!(matches!(
            decompose(&node, &Material::aluminum(), &Material::air()),
            Err(Error::UnsupportedConstruct { .. })
        ));
        let node = CsgNode::union(vec![CsgNode::sphere(1.0, 8)]);
        assert!(matches!(
            decompose(&node, &Material::aluminum(), &Material::air()),
            Err(Error::UnsupportedConstruct { .. })
        ));
    }
}
