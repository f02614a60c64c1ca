use conebundle::camera::Vec3;
use conebundle::harness::metrics::{psnr, ssim};
use conebundle::harness::scene::{
    preset_rig, preset_spec, render_source_views, PrimitiveSpec, SceneSpec, TextureSpec, SCENE_VERSION,
};
use conebundle::io::{read_pfm, write_pfm};
use conebundle::{Camera, SyntheticScene};
use rustfft::{num_complex::Complex, FftPlanner};

fn two_planes() -> SyntheticScene {
    SyntheticScene::from_spec(&preset_spec("two-planes").unwrap()).unwrap()
}

/// Independent ray/rectangle intersection for the two-planes layout.
fn two_planes_depth(origin: Vec3, dir: Vec3, f: f64) -> f64 {
    let hit = |z: f64, cx: f64, hx: f64, hy: f64| {
        let t = (z - origin.z) / dir.z;
        let p = origin + dir * t;
        (t > 0.0 && (p.x - cx).abs() <= hx && p.y.abs() <= hy).then_some(t)
    };
    let t = hit(2.0, -0.7, 0.8, 0.45).or_else(|| hit(4.0, 0.0, 4.0, 4.0));
    t.map_or(f64::INFINITY, |t| t * f)
}

#[test]
fn depth_maps_match_ray_plane_oracle() {
    let scene = two_planes();
    let rig = preset_rig(96).unwrap();
    let cams: Vec<Camera> = std::iter::once(rig.target.clone()).chain(rig.sources.clone()).collect();
    let renders = render_source_views(&scene, &cams);
    for (cam, (_, depth)) in cams.iter().zip(&renders) {
        for v in 0..cam.height() {
            for u in 0..cam.width() {
                let ray = cam.cast_ray(u, v).unwrap();
                let expect = two_planes_depth(ray.origin, ray.direction, cam.focal());
                let got = depth.texel(u, v)[0];
                let query = scene.depth_query(cam, u, v).unwrap();
                assert!((got - expect).abs() <= 1e-9, "({u},{v}): {got} vs {expect}");
                assert!((query - got).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn two_planes_depth_histogram_is_bimodal() {
    let scene = two_planes();
    let rig = preset_rig(128).unwrap();
    let depth = scene.depth_map(&rig.target);
    let near = depth.data().iter().filter(|&&d| (d - 2.0).abs() < 1e-9).count();
    let far = depth.data().iter().filter(|&&d| (d - 4.0).abs() < 1e-9).count();
    assert_eq!(near + far, 128 * 128);

    // analytic coverage: pixels whose center ray lands inside the card
    let cam = &rig.target;
    let covered = (0..128)
        .flat_map(|v| (0..128).map(move |u| (u, v)))
        .filter(|&(u, v)| {
            let r = cam.cast_ray(u, v).unwrap();
            let p = r.at(2.0 / r.direction.z);
            (p.x + 0.7).abs() <= 0.8 && p.y.abs() <= 0.45
        })
        .count();
    assert_eq!(near, covered);
    let frac = near as f64 / (128.0 * 128.0);
    assert!(frac > 0.1 && frac < 0.5, "card covers {frac}");
}

fn sine_card(frequency: f64) -> SyntheticScene {
    SyntheticScene::from_spec(&SceneSpec {
        version: SCENE_VERSION,
        name: "sine".into(),
        seed: 0,
        depth_range: [1.0, 3.0],
        primitives: vec![PrimitiveSpec::Plane {
            center: [0.0, 0.0, 2.0],
            normal: [0.0, 0.0, -1.0],
            u_axis: [1.0, 0.0, 0.0],
            half_extent: [10.0, 10.0],
            texture: TextureSpec::Sine { frequency, angle: 0.0, a: [0.0; 3], b: [1.0; 3] },
        }],
    })
    .unwrap()
}

fn row_spectrum_peak(scene: &SyntheticScene, cam: &Camera) -> usize {
    let (img, _) = scene.render(cam);
    let w = cam.width();
    let mean_row: Vec<f64> =
        (0..w).map(|u| (0..cam.height()).map(|v| img.texel(u, v)[0]).sum::<f64>() / cam.height() as f64).collect();
    let dc = mean_row.iter().sum::<f64>() / w as f64;
    let mut buf: Vec<Complex<f64>> = mean_row.iter().map(|&x| Complex::new(x - dc, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(w).process(&mut buf);
    (1..w / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap()
}

#[test]
fn doubling_texture_frequency_doubles_spectral_peak() {
    let cam =
        Camera::look_at(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, -1.0, 0.0), 1.0, 1.0 / 128.0, 128, 32)
            .unwrap();
    // the visible strip is 2 units wide on the card: 2·f cycles across the frame
    let p1 = row_spectrum_peak(&sine_card(2.0), &cam);
    let p2 = row_spectrum_peak(&sine_card(4.0), &cam);
    assert_eq!(p1, 4);
    assert_eq!(p2, 2 * p1);
}

#[test]
fn source_views_differ_but_agree_on_content() {
    let scene = two_planes();
    let rig = preset_rig(64).unwrap();
    let renders = render_source_views(&scene, &rig.sources);
    let (target, _) = scene.render(&rig.target);
    for (img, _) in &renders {
        let p = psnr(img, &target).unwrap();
        assert!(p.is_finite() && p > 10.0);
        assert!(ssim(img, &target).unwrap() > 0.2);
    }
}

#[test]
fn depth_survives_pfm_round_trip() {
    let scene = two_planes();
    let rig = preset_rig(32).unwrap();
    let depth = scene.depth_map(&rig.target);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.pfm");
    write_pfm(&path, &depth).unwrap();
    // depths 2 and 4 are exact in f32
    assert_eq!(read_pfm(&path).unwrap(), depth);
}
