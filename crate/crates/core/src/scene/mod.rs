//! Specimen geometry: CSG trees, triangle meshes and generators.

mod csg;
mod decompose;
mod mask;
mod material;
mod mesh;
mod specimen;
mod tessellate;

pub use csg::{BooleanOp, CsgNode, Primitive};
pub use decompose::decompose;
pub use mask::{ground_truth_mask, GroundTruthMask};
pub use material::Material;
pub use mesh::{mesh_volume, TriMesh};
pub use specimen::{
    generate_fml_stack, generate_pore_plate, glare_layers, Layer, PoreCount, PorePlateParams,
    PoreSpec, Range, SpecimenKind, SpecimenSpec, PORE_RETRY_BUDGET, SPEC_SCHEMA_VERSION,
};
pub use tessellate::{sphere_ring_radius, tessellate};
