//! STL surface meshes, binary and ASCII.
//!
//! Binary layout: 80-byte header, `u32` triangle count, then per triangle
//! the facet normal, three vertices (all `f32` little endian) and a `u16`
//! attribute word, 50 bytes in total.

use std::collections::HashMap;
use std::fmt::Write as _;

use radisynth_core::geom::Vec3;
use radisynth_core::scene::{Material, TriMesh};

use crate::error::{Error, Result};

const HEADER_LEN: usize = 80;
const FACET_LEN: usize = 50;

fn facet_normal(mesh: &TriMesh, i: usize) -> Vec3 {
    let [a, b, c] = mesh.triangle(i);
    let n = (b - a).cross(c - a);
    let len = n.norm();
    if len > 0.0 {
        n * (1.0 / len)
    } else {
        Vec3::ZERO
    }
}

/// Binary STL; the header carries `name` truncated to 80 bytes.
pub fn write_binary(mesh: &TriMesh, name: &str) -> Vec<u8> {
    let n = mesh.triangles.len();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + FACET_LEN * n);
    let mut header = [0u8; HEADER_LEN];
    let bytes = name.as_bytes();
    let k = bytes.len().min(HEADER_LEN);
    header[..k].copy_from_slice(&bytes[..k]);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for i in 0..n {
        let nrm = facet_normal(mesh, i);
        for v in std::iter::once(nrm).chain(mesh.triangle(i)) {
            for c in v.to_array() {
                out.extend_from_slice(&(c as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

pub fn write_ascii(mesh: &TriMesh, name: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "solid {name}");
    for i in 0..mesh.triangles.len() {
        let n = facet_normal(mesh, i);
        let _ = writeln!(s, "  facet normal {:e} {:e} {:e}", n.x as f32, n.y as f32, n.z as f32);
        let _ = writeln!(s, "    outer loop");
        for v in mesh.triangle(i) {
            let _ = writeln!(s, "      vertex {:e} {:e} {:e}", v.x as f32, v.y as f32, v.z as f32);
        }
        let _ = writeln!(s, "    endloop");
        let _ = writeln!(s, "  endfacet");
    }
    let _ = writeln!(s, "endsolid {name}");
    s
}

/// Collects facets into an indexed mesh, merging vertices with identical
/// `f32` coordinates.
#[derive(Default)]
struct MeshBuilder {
    index: HashMap<[u32; 3], u32>,
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl MeshBuilder {
    fn vertex(&mut self, v: [f32; 3]) -> u32 {
        let key = v.map(f32::to_bits);
        let next = self.vertices.len() as u32;
        *self.index.entry(key).or_insert_with(|| {
            self.vertices
                .push(Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64));
            next
        })
    }

    fn facet(&mut self, vs: [[f32; 3]; 3]) {
        let t = vs.map(|v| self.vertex(v));
        self.triangles.push(t);
    }

    fn finish(self, material: Material) -> TriMesh {
        TriMesh::new(self.vertices, self.triangles, material)
    }
}

/// Parses binary or ASCII STL. A file is taken as binary when its size
/// matches the triangle count in the header, or when it does not start
/// with `solid`.
pub fn read(bytes: &[u8], material: Material) -> Result<TriMesh> {
    let looks_ascii = bytes.len() >= 5 && &bytes[..5] == b"solid";
    let binary_size_ok = bytes.len() >= HEADER_LEN + 4 && {
        let n = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap()) as usize;
        bytes.len() == HEADER_LEN + 4 + n * FACET_LEN
    };
    if binary_size_ok || !looks_ascii {
        read_binary(bytes, material)
    } else {
        read_ascii(bytes, material)
    }
}

pub fn read_binary(bytes: &[u8], material: Material) -> Result<TriMesh> {
    let err = |off: usize, msg: String| Error::parse("binary STL", Some(off as u64), msg);
    if bytes.len() < HEADER_LEN + 4 {
        return Err(err(
            bytes.len(),
            format!("file has {} bytes, header needs 84", bytes.len()),
        ));
    }
    let n = u32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap()) as usize;
    let expected = HEADER_LEN + 4 + n * FACET_LEN;
    if bytes.len() < expected {
        let complete = (bytes.len() - HEADER_LEN - 4) / FACET_LEN;
        return Err(err(
            HEADER_LEN + 4 + complete * FACET_LEN,
            format!("header declares {n} triangles but only {complete} are present"),
        ));
    }
    if bytes.len() > expected {
        return Err(err(
            expected,
            format!(
                "{} trailing bytes after the {n} declared triangles",
                bytes.len() - expected
            ),
        ));
    }
    let f = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let mut b = MeshBuilder::default();
    for t in 0..n {
        let base = HEADER_LEN + 4 + t * FACET_LEN + 12;
        let v = |k: usize| {
            let o = base + 12 * k;
            [f(o), f(o + 4), f(o + 8)]
        };
        b.facet([v(0), v(1), v(2)]);
    }
    Ok(b.finish(material))
}

pub fn read_ascii(bytes: &[u8], material: Material) -> Result<TriMesh> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        Error::parse("ASCII STL", Some(e.valid_up_to() as u64), "invalid UTF-8")
    })?;
    let mut b = MeshBuilder::default();
    let mut pending: Vec<[f32; 3]> = Vec::with_capacity(3);
    let mut in_facet = false;
    let mut offset = 0usize;
    for line in text.split_inclusive('\n') {
        let err = |msg: String| Error::parse("ASCII STL", Some(offset as u64), msg);
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("facet") => {
                if in_facet {
                    return Err(err("nested facet".into()));
                }
                in_facet = true;
                pending.clear();
            }
            Some("vertex") => {
                if !in_facet {
                    return Err(err("vertex outside facet".into()));
                }
                let mut v = [0f32; 3];
                for c in &mut v {
                    *c = tok
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| err(format!("bad vertex line '{}'", line.trim())))?;
                }
                pending.push(v);
            }
            Some("endfacet") => {
                if pending.len() != 3 {
                    return Err(err(format!("facet has {} vertices, expected 3", pending.len())));
                }
                b.facet([pending[0], pending[1], pending[2]]);
                in_facet = false;
            }
            Some("solid" | "endsolid" | "outer" | "endloop") | None => {}
            Some(other) => return Err(err(format!("unexpected keyword '{other}'"))),
        }
        offset += line.len();
    }
    if in_facet {
        return Err(Error::parse(
            "ASCII STL",
            Some(offset as u64),
            "file ends inside a facet",
        ));
    }
    Ok(b.finish(material))
}

#[cfg(test)]
mod tests {
    use super::*;
    use radisynth_core::scene::{tessellate, CsgNode};

    fn unit_box() -> TriMesh {
        tessellate(&CsgNode::cuboid(Vec3::ONE, true), &Material::aluminum()).unwrap()
    }

    #[test]
    fn unit_box_is_684_bytes() {
        let m = unit_box();
        assert_eq!(m.triangles.len(), 12);
        assert_eq!(write_binary(&m, "box").len(), 684);
    }

    #[test]
    fn binary_and_ascii_round_trip() {
        let m = unit_box();
        for bytes in [write_binary(&m, "box"), write_ascii(&m, "box").into_bytes()] {
            let r = read(&bytes, Material::aluminum()).unwrap();
            assert_eq!(r.vertices.len(), 8);
            assert_eq!(r.triangles.len(), 12);
            r.check_watertight().unwrap();
            assert!((r.volume().unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = write_binary(&unit_box(), "box");
        match read_binary(&bytes[..bytes.len() - 10], Material::air()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, Some(84 + 11 * 50)),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            read_binary(&bytes[..40], Material::air()),
            Err(Error::Parse { offset: Some(40), .. })
        ));
    }

    #[test]
    fn ascii_errors_have_offsets() {
        let bad = b"solid x\n  facet normal 0 0 1\n    outer loop\n      vertex 0 0 nope\n";
        match read_ascii(bad, Material::air()) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, Some(44)),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
