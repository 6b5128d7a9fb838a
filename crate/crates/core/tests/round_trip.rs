use std::time::Instant;

use pfcal::datagen::{random_gravity, sample_camera_of};
use pfcal::{gravity_angular_error, render_fields, solve, CameraModel, GridSpec, SolveConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn round_trip(model: CameraModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..20 {
        let gt = sample_camera_of(&mut rng, model, 640, 640).intrinsics;
        let g = random_gravity(&mut rng, std::f64::consts::FRAC_PI_4);
        let field = render_fields(&gt, &g, &GridSpec::for_image(640, 640)).unwrap();
        assert_eq!((field.width, field.height), (64, 64));
        let start = Instant::now();
        let est = solve(&[field], &SolveConfig::new(model)).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let cam = est.intrinsics_for_view(0);
        let dv = (cam.vfov().unwrap() - gt.vfov().unwrap()).abs();
        let dg = gravity_angular_error(&est.gravities[0], &g);
        let dd = (cam.distortion() - gt.distortion()).abs();
        println!(
            "{model} #{i}: vfov {:.3} d {:.3} -> dvfov {dv:.2e} dg {dg:.2e} dd {dd:.2e} iters {} {secs:.3}s",
            gt.vfov().unwrap(),
            gt.distortion(),
            est.iterations
        );
        assert!(dv < 0.05 && dg < 0.02 && dd < 1e-3, "{model} instance {i} failed");
        worst = (worst.0.max(dv), worst.1.max(dg), worst.2.max(dd), worst.3.max(secs));
    }
    println!("{model}: worst dvfov {:.2e} dg {:.2e} dd {:.2e} time {:.3}s", worst.0, worst.1, worst.2, worst.3);
    assert!(worst.3 < 1.0);
}

#[test]
fn pinhole_round_trip() {
    round_trip(CameraModel::Pinhole, 11);
}

#[test]
fn simple_radial_round_trip() {
    round_trip(CameraModel::SimpleRadial, 12);
}

#[test]
fn ucm_round_trip() {
    round_trip(CameraModel::Ucm, 13);
}
