use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Matrix3;
use pfcal::datagen::{
    camera_rotation, direction_to_lonlat, lonlat_to_direction, reproject, sample_camera_of, sample_coordinates,
    world_ray, EquirectImage,
};
use pfcal::{CameraModel, PixelPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn angle(a: &nalgebra::Vector3<f64>, b: &nalgebra::Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

#[test]
fn pixel_ray_pano_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for model in CameraModel::ALL {
        let mut worst = 0.0f64;
        let mut checked = 0;
        while checked < 1000 {
            let cam = sample_camera_of(&mut rng, model, 640, 480).intrinsics;
            let r = camera_rotation(rng.random_range(-PI..PI), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let p = PixelPoint::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let Ok(ray) = cam.unproject(&p) else { continue };
            let world = world_ray(&cam, &r, &p).unwrap();
            let (lon, colat) = direction_to_lonlat(&world);
            assert!((-PI..PI).contains(&lon) && (0.0..=PI).contains(&colat));
            let back = r * lonlat_to_direction(lon, colat);
            worst = worst.max(angle(&back, &ray));
            checked += 1;
        }
        assert!(worst < 1e-6, "{model}: {worst:e} rad");
    }
}

#[test]
fn quarter_turn_yaw_shifts_longitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    // World rotation by +90 degrees about +Z, exact entries.
    let quarter = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    for model in CameraModel::ALL {
        let cam = sample_camera_of(&mut rng, model, 96, 64).intrinsics;
        let r = camera_rotation(rng.random_range(-PI..PI), 0.3, -0.2);
        let a = sample_coordinates(&cam, &r);
        let b = sample_coordinates(&cam, &(r * quarter.transpose()));
        let mut compared = 0;
        for (a, b) in a.iter().zip(&b) {
            let (Some((lon_a, colat_a)), Some((lon_b, colat_b))) = (a, b) else {
                assert_eq!(a.is_some(), b.is_some());
                continue;
            };
            assert_eq!(colat_a, colat_b);
            if colat_a.sin() < 1e-6 {
                continue;
            }
            let shift = (lon_b - lon_a).rem_euclid(2.0 * PI);
            assert!((shift - FRAC_PI_2).abs() < 1e-12, "{model}: shift {shift}");
            compared += 1;
        }
        assert!(compared > 1000);
    }
}

#[test]
fn reprojection_marks_out_of_domain_pixels() {
    let pano = EquirectImage::new(image::RgbImage::from_pixel(64, 32, image::Rgb([200, 100, 50]))).unwrap();
    let cam = pfcal::CameraIntrinsics::from_hfov(CameraModel::Ucm, 64, 64, 190.0, 2.0).unwrap();
    let out = reproject(&pano, &camera_rotation(0.0, 0.0, 0.0), &cam);
    let coords = sample_coordinates(&cam, &camera_rotation(0.0, 0.0, 0.0));
    for (i, c) in coords.iter().enumerate() {
        assert_eq!(out.valid[i], c.is_some());
        let px = out.image.get_pixel(i as u32 % 64, i as u32 / 64).0;
        assert_eq!(px, if c.is_some() { [200, 100, 50] } else { [0, 0, 0] });
    }
    assert!(out.valid.iter().any(|v| !v));
}
