use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::{Transform, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BooleanOp {
    Union,
    Difference,
    Intersection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    /// UV sphere; `segments` is the number of meridians (`$fn`).
    Sphere { radius: f64, segments: u32 },
    Cuboid { size: Vec3, centered: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsgNode {
    Primitive(Primitive),
    Transformed {
        transform: Transform,
        child: Box<CsgNode>,
    },
    Boolean {
        op: BooleanOp,
        children: Vec<CsgNode>,
    },
}

impl CsgNode {
    pub fn sphere(radius: f64, segments: u32) -> Self {
        CsgNode::Primitive(Primitive::Sphere { radius, segments })
    }

    pub fn cuboid(size: Vec3, centered: bool) -> Self {
        CsgNode::Primitive(Primitive::Cuboid { size, centered })
    }

    pub fn transformed(self, transform: Transform) -> Self {
        CsgNode::Transformed {
            transform,
            child: Box::new(self),
        }
    }

    pub fn union(children: Vec<CsgNode>) -> Self {
        CsgNode::Boolean {
            op: BooleanOp::Union,
            children,
        }
    }

    pub fn difference(children: Vec<CsgNode>) -> Self {
        CsgNode::Boolean {
            op: BooleanOp::Difference,
            children,
        }
    }

    pub fn contains_boolean(&self) -> bool {
        match self {
            CsgNode::Primitive(_) => false,
            CsgNode::Transformed { child, .. } => child.contains_boolean(),
            CsgNode::Boolean { .. } => true,
        }
    }

    /// Checks the per-node invariants (positive sizes and scales, at least
    /// six sphere segments).
    pub fn validate(&self) -> Result<()> {
        match self {
            CsgNode::Primitive(Primitive::Sphere { radius, segments }) => {
                if !(*radius > 0.0) {
                    return Err(invalid(format!("sphere radius {radius} must be > 0")));
                }
                if *segments < 6 {
                    return Err(invalid(format!("sphere segments {segments} must be >= 6")));
                }
                Ok(())
            }
            CsgNode::Primitive(Primitive::Cuboid { size, .. }) => {
                if !(size.x > 0.0 && size.y > 0.0 && size.z > 0.0) {
                    return Err(invalid(format!("box size {size:?} must be positive")));
                }
                Ok(())
            }
            CsgNode::Transformed { transform, child } => {
                if !transform.has_valid_scale() {
                    return Err(invalid(format!(
                        "transform scale {:?} must be positive",
                        transform.scale
                    )));
                }
                child.validate()
            }
            CsgNode::Boolean { children, .. } => children.iter().try_for_each(|c| c.validate()),
        }
    }
}
