use radisynth_core::geom::{Transform, Vec3};
use radisynth_core::raster::Raster;
use radisynth_core::scene::{
    decompose, generate_fml_stack, generate_pore_plate, glare_layers, mesh_volume, tessellate, CsgNode, Material,
    PoreCount, PorePlateParams,
};
use radisynth_core::xray::{
    add_noise, dequantize, quantize, ray_path_lengths, simulate_projection, simulate_rotation_series,
    AcquisitionConfig, NoiseModel, ProjectionGeometry, ProjectionImage, QuantizationSpec,
};

#[test]
fn sphere_chords_converge_with_segments() {
    let r = 2.0;
    let dir = Vec3::new(0.3, -0.5, 0.81).normalized();
    // a basis perpendicular to the ray for the impact offsets
    let e1 = dir.cross(Vec3::new(1.0, 0.0, 0.0)).normalized();
    let e2 = dir.cross(e1);
    let worst = |segments: u32| {
        let m = tessellate(&CsgNode::sphere(r, segments), &Material::aluminum()).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..12 {
            let b = 0.5 * r * k as f64 / 11.0;
            let ang = k as f64 * 0.7;
            let off = e1 * (b * ang.cos()) + e2 * (b * ang.sin());
            let l = ray_path_lengths(off - dir * 10.0, dir, std::slice::from_ref(&m)).unwrap()[0];
            let exact = 2.0 * (r * r - b * b).sqrt();
            worst = worst.max((l - exact).abs() / exact);
        }
        worst
    };
    let (e20, e80) = (worst(20), worst(80));
    assert!(e20 < 0.02, "segments 20: {e20}");
    assert!(e80 < 0.005, "segments 80: {e80}");
    assert!(e80 < e20);
}

#[test]
fn defect_volume_audit_matches_ray_integrated_thickness() {
    let params = PorePlateParams {
        size: Vec3::new(20.0, 12.0, 4.0),
        count: PoreCount::Fixed(12),
        ..PorePlateParams::default()
    };
    let spec = generate_pore_plate(&params, 21).unwrap();
    let meshes = decompose(&spec.to_csg(), &params.host, &params.pore_material).unwrap();
    let solid = mesh_volume(&meshes[0]).unwrap() - meshes[1..].iter().map(|m| mesh_volume(m).unwrap()).sum::<f64>();
    // parallel rays along z on a fine grid; host minus pore chords
    let (nx, ny) = (400, 240);
    let (dx, dy) = (20.0 / nx as f64, 12.0 / ny as f64);
    let mut integrated = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let o = Vec3::new(-10.0 + (i as f64 + 0.5) * dx, -6.0 + (j as f64 + 0.5) * dy, -10.0);
            let l = ray_path_lengths(o, Vec3::new(0.0, 0.0, 1.0), &meshes).unwrap();
            integrated += (l[0] - l[1..].iter().sum::<f64>()) * dx * dy;
        }
    }
    assert!(((integrated - solid) / solid).abs() < 0.01, "{integrated} vs {solid}");
    let pores: f64 = meshes[1..].iter().map(|m| mesh_volume(m).unwrap()).sum();
    let analytic: f64 = spec.defects.iter().map(|p| {
        let s = p.semi_axes();
        4.0 / 3.0 * std::f64::consts::PI * s.x * s.y * s.z
    }).sum();
    assert!(((pores - analytic) / analytic).abs() < 0.01);
}

#[test]
fn laminate_line_integral_is_layer_sum() {
    let spec = generate_fml_stack([10.0, 10.0], &glare_layers()).unwrap();
    let meshes = spec.meshes().unwrap();
    assert_eq!(meshes.len(), 5);
    let g = ProjectionGeometry::new(300.0, 600.0, 0.1, 4, 4);
    let img = simulate_projection(&meshes, &g).unwrap();
    let expect: f64 = glare_layers().iter().map(|l| l.material.mu * l.thickness).sum();
    assert!((spec.thickness() - 1.7).abs() < 1e-12);
    // central pixels see the stack almost perpendicularly
    let (o, d) = g.rays().ray(1, 1);
    let l = ray_path_lengths(o, d, &meshes).unwrap();
    let along: f64 = meshes.iter().zip(&l).map(|(m, l)| m.material.mu * l).sum();
    assert!((-img.get(1, 1).ln() - along).abs() < 1e-12);
    let cos = d.z / d.norm();
    assert!((along * cos - expect).abs() < 1e-9);
}

#[test]
fn single_projection_series_equals_radiograph() {
    let m = tessellate(&CsgNode::cuboid(Vec3::new(6.0, 6.0, 2.0), true).transformed(Transform::rotate(Vec3::new(10.0, 20.0, 0.0))), &Material::aluminum()).unwrap();
    let g = ProjectionGeometry::new(300.0, 600.0, 0.2, 24, 20);
    let cfg = AcquisitionConfig { count: 1, start_deg: 0.0, range_deg: 180.0, geometry: g.clone() };
    let series = simulate_rotation_series(std::slice::from_ref(&m), &cfg).unwrap();
    assert_eq!(series.len(), 1);
    assert_eq!(series[0].pixels, simulate_projection(&[m], &g).unwrap().pixels);
}

#[test]
fn four_hundred_projection_series() {
    let m = tessellate(&CsgNode::sphere(1.0, 12), &Material::aluminum()).unwrap();
    let cfg = AcquisitionConfig {
        count: 400,
        start_deg: 0.0,
        range_deg: 180.0,
        geometry: ProjectionGeometry::new(300.0, 600.0, 0.5, 4, 4),
    };
    let series = simulate_rotation_series(&[m], &cfg).unwrap();
    assert_eq!(series.len(), 400);
    for (k, img) in series.iter().enumerate() {
        assert!((img.meta.angle_deg - 0.45 * k as f64).abs() < 1e-9);
    }
}

#[test]
fn relative_noise_has_requested_spread() {
    let img = ProjectionImage::new(Raster::filled(1000, 1000, 0.8), 0.1);
    let noisy = add_noise(&img, &NoiseModel::relative(0.1, 42)).unwrap();
    let n = noisy.pixels.data.len() as f64;
    let rel: Vec<f64> = noisy.pixels.data.iter().map(|v| v / 0.8 - 1.0).collect();
    let mean = rel.iter().sum::<f64>() / n;
    let sd = (rel.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((sd - 0.1).abs() < 0.003, "{sd}");
    assert_eq!(noisy.meta.noise.as_ref().unwrap().sigma, 0.1);
}

#[test]
fn quantization_round_trip_bound() {
    for bits in [12u32, 16] {
        let spec = QuantizationSpec::new(bits).unwrap();
        let full = f64::from(spec.max_value());
        let values: Vec<f64> = (0..10_000).map(|i| i as f64 / 9_999.0).collect();
        let img = ProjectionImage::new(Raster::from_vec(100, 100, values.clone()).unwrap(), 0.2);
        let back = dequantize(&quantize(&img, spec).unwrap(), bits, 0.2).unwrap();
        for (a, b) in values.iter().zip(&back.pixels.data) {
            assert!((a - b).abs() <= 0.5 / full + 1e-15);
        }
    }
}
