use radisynth_core::ct::{fbp_slice, reconstruct_volume, to_sinogram, FilterSpec, Sinogram, SliceGrid, Volume, DEFAULT_EPSILON};
use radisynth_core::geom::{Transform, Vec3};
use radisynth_core::scene::{decompose, generate_fml_stack, glare_layers, tessellate, CsgNode, Material};
use radisynth_core::xray::{simulate_rotation_series, AcquisitionConfig, ProjectionGeometry};
use radisynth_core::zprofile::extract_zprofiles;

/// Quasi-parallel setup: source far from a small object, magnification 2.
fn geometry(width: usize, rows: usize, pitch: f64) -> ProjectionGeometry {
    ProjectionGeometry::new(2000.0, 4000.0, pitch, width, rows)
}

fn scan(meshes: &[radisynth_core::scene::TriMesh], count: usize, g: &ProjectionGeometry) -> Volume {
    let cfg = AcquisitionConfig { count, start_deg: 0.0, range_deg: 180.0, geometry: g.clone() };
    let series = simulate_rotation_series(meshes, &cfg).unwrap();
    reconstruct_volume(&series, &FilterSpec::default(), None).unwrap()
}

/// Plate 6 mm along x, 2 mm along z (tall along the rotation axis).
fn slab_plate() -> CsgNode {
    CsgNode::cuboid(Vec3::new(6.0, 20.0, 2.0), true)
}

#[test]
fn slab_reconstruction_interior_and_background() {
    let al = Material::aluminum();
    let m = tessellate(&slab_plate(), &al).unwrap();
    let g = geometry(96, 2, 0.2);
    let v = scan(&[m], 400, &g);
    let h = v.voxel_size[0];
    let y = 1;
    let (mut worst_in, mut worst_out) = (0.0f64, 0.0f64);
    for k in 0..v.nz {
        for i in 0..v.nx {
            let x = (i as f64 + 0.5 - v.nx as f64 / 2.0) * h;
            let z = (k as f64 + 0.5 - v.nz as f64 / 2.0) * h;
            // distance to the slab boundary, positive outside
            let dist = (x.abs() - 3.0).max(z.abs() - 1.0);
            let mu = v.get(i, y, k);
            if dist < -2.0 * h {
                worst_in = worst_in.max((mu - al.mu).abs() / al.mu);
            } else if dist > 2.0 * h {
                worst_out = worst_out.max(mu.abs() / al.mu);
            }
        }
    }
    assert!(worst_in < 0.10, "interior deviation {worst_in}");
    assert!(worst_out < 0.05, "background {worst_out}");
}

#[test]
fn pore_is_darker_than_host() {
    let al = Material::aluminum();
    let node = CsgNode::difference(vec![
        slab_plate(),
        CsgNode::union(vec![CsgNode::sphere(0.7, 24).transformed(Transform::translate(Vec3::new(1.0, 0.0, 0.0)))]),
    ]);
    let meshes = decompose(&node, &al, &Material::air()).unwrap();
    let g = geometry(96, 2, 0.2);
    let v = scan(&meshes, 200, &g);
    let h = v.voxel_size[0];
    let (mut pore, mut np, mut host, mut nh) = (0.0, 0, 0.0, 0);
    // row 0 and 1 straddle y = 0, the pore's equator
    for k in 0..v.nz {
        for i in 0..v.nx {
            let x = (i as f64 + 0.5 - v.nx as f64 / 2.0) * h;
            let z = (k as f64 + 0.5 - v.nz as f64 / 2.0) * h;
            let r = ((x - 1.0).powi(2) + z * z).sqrt();
            if r < 0.4 {
                pore += v.get(i, 1, k);
                np += 1;
            } else if r > 1.0 && x.abs() < 2.6 && z.abs() < 0.6 {
                host += v.get(i, 1, k);
                nh += 1;
            }
        }
    }
    let (pore, host) = (pore / np as f64, host / nh as f64);
    assert!(pore < 0.7 * host, "pore {pore} host {host}");
}

#[test]
fn more_projections_do_not_increase_error() {
    let al = Material::aluminum();
    let m = tessellate(&slab_plate(), &al).unwrap();
    // 512 bins across the field: 400 views sit below the angular sampling
    // limit, 800 views above it
    let g = geometry(512, 2, 0.04);
    let rms = |v: &Volume| {
        let h = v.voxel_size[0];
        let mut s = 0.0;
        for k in 0..v.nz {
            for i in 0..v.nx {
                let x = (i as f64 + 0.5 - v.nx as f64 / 2.0) * h;
                let z = (k as f64 + 0.5 - v.nz as f64 / 2.0) * h;
                let truth = if x.abs() < 3.0 && z.abs() < 1.0 { al.mu } else { 0.0 };
                s += (v.get(i, 1, k) - truth).powi(2);
            }
        }
        (s / (v.nx * v.nz) as f64).sqrt()
    };
    let e400 = rms(&scan(std::slice::from_ref(&m), 400, &g));
    let e800 = rms(&scan(&[m], 800, &g));
    assert!(e800 <= e400, "800: {e800}, 400: {e400}");
}

#[test]
fn full_turn_sinogram_is_mirror_symmetric() {
    let m = tessellate(
        &CsgNode::sphere(1.5, 32).transformed(Transform::translate(Vec3::new(2.0, 0.0, -1.0))),
        &Material::aluminum(),
    )
    .unwrap();
    let g = ProjectionGeometry::new(20000.0, 40000.0, 0.2, 64, 1);
    let cfg = AcquisitionConfig { count: 8, start_deg: 0.0, range_deg: 360.0, geometry: g };
    let sino = &to_sinogram(&simulate_rotation_series(&[m], &cfg).unwrap(), DEFAULT_EPSILON).unwrap()[0];
    let peak = sino.values.iter().fold(0.0f64, |a, &b| a.max(b));
    for a in 0..4 {
        let (p, q) = (sino.row(a), sino.row(a + 4));
        for j in 0..64 {
            assert!((p[j] - q[63 - j]).abs() <= 0.02 * peak, "angle {a} bin {j}");
        }
    }
}

fn two_disks(angles: &[f64], rot_deg: f64) -> Sinogram {
    let (c, s) = (rot_deg.to_radians().cos(), rot_deg.to_radians().sin());
    let disks: Vec<(f64, f64, f64, f64)> = [(4.0, 1.0, 2.5, 0.3), (-3.0, -2.0, 1.5, 0.6)]
        .iter()
        .map(|&(x, z, r, mu)| (c * x - s * z, s * x + c * z, r, mu))
        .collect();
    Sinogram::from_fn(angles.to_vec(), 128, 0.125, move |deg, t| {
        let (ct, st) = (deg.to_radians().cos(), deg.to_radians().sin());
        disks
            .iter()
            .map(|&(x, z, r, mu)| {
                let d = t - (x * ct + z * st);
                if d.abs() < r { 2.0 * mu * (r * r - d * d).sqrt() } else { 0.0 }
            })
            .sum()
    })
}

#[test]
fn reconstruction_commutes_with_rotation() {
    let angles: Vec<f64> = (0..400).map(|k| k as f64 * 0.45).collect();
    let grid = SliceGrid::square(96, 0.15);
    let f = FilterSpec::default();
    let delta = 30.0f64;
    let base = fbp_slice(&two_disks(&angles, 0.0), &f, &grid).unwrap();
    let turned = fbp_slice(&two_disks(&angles, delta), &f, &grid).unwrap();
    let sample = |x: f64, z: f64| {
        let fi = x / grid.voxel_size + grid.nx as f64 / 2.0 - 0.5;
        let fk = z / grid.voxel_size + grid.nz as f64 / 2.0 - 0.5;
        let (i0, k0) = (fi.floor(), fk.floor());
        if i0 < 0.0 || k0 < 0.0 || i0 + 1.0 >= grid.nx as f64 || k0 + 1.0 >= grid.nz as f64 {
            return 0.0;
        }
        let (tx, tz) = (fi - i0, fk - k0);
        let (i0, k0) = (i0 as usize, k0 as usize);
        let g = |i, k| *base.get(i, k);
        (1.0 - tx) * (1.0 - tz) * g(i0, k0) + tx * (1.0 - tz) * g(i0 + 1, k0) + (1.0 - tx) * tz * g(i0, k0 + 1) + tx * tz * g(i0 + 1, k0 + 1)
    };
    let (c, s) = (delta.to_radians().cos(), delta.to_radians().sin());
    let (mut diff, mut n) = (0.0, 0);
    for k in 0..grid.nz {
        for i in 0..grid.nx {
            let (x, z) = (grid.x_at(i), grid.z_at(k));
            // pull back through the inverse rotation
            let (bx, bz) = (c * x + s * z, -s * x + c * z);
            diff += (turned.get(i, k) - sample(bx, bz)).abs();
            n += 1;
        }
    }
    let mean = diff / n as f64;
    assert!(mean <= 0.02 * 0.6, "mean deviation {mean}");
}

#[test]
fn laminate_profile_is_a_staircase() {
    let layers = glare_layers();
    let spec = generate_fml_stack([6.0, 6.0], &layers).unwrap();
    let g = geometry(160, 2, 0.1);
    let v = scan(&spec.meshes().unwrap(), 400, &g);
    let h = v.voxel_size[2];
    let grid = extract_zprofiles(&v, 1, 1).unwrap();
    let p = &grid.at(v.nx / 2, 1).values;
    // layer centers in z; the stack spans z in [-0.85, 0.85]
    let mut z0 = -0.85;
    for l in &layers {
        let zc = z0 + l.thickness / 2.0;
        let k = ((zc / h) + v.nz as f64 / 2.0 - 0.5).round() as usize;
        let err = (p[k] - l.material.mu).abs();
        assert!(err < 0.1 * Material::aluminum().mu, "layer at z {zc}: {} vs {}", p[k], l.material.mu);
        z0 += l.thickness;
    }
}
