use std::f64::consts::PI;

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use pfcal::datagen::{
    augment_with_offsets, match_trajectories, synthetic_trajectory, umeyama_align, AlignError, AlignMode, Pose,
    RotationOffset, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
    (0..n)
        .map(|_| Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-2.0..2.0)))
        .collect()
}

#[test]
fn full_mode_recovers_similarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for _ in 0..50 {
        let n = rng.random_range(3..40);
        let src = cloud(&mut rng, n);
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let rot = Rotation3::from_scaled_axis(axis.normalize() * rng.random_range(-3.0..3.0));
        let s = rng.random_range(0.1..10.0);
        let t = Vector3::new(rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0), rng.random_range(-9.0..9.0));
        let dst: Vec<_> = src.iter().map(|p| rot * p * s + t).collect();
        let tf = umeyama_align(&src, &dst, AlignMode::Full).unwrap();
        assert!((tf.s - s).abs() < 1e-9 * s);
        assert!((tf.rotation - rot.matrix()).norm() < 1e-9);
        assert!((tf.t - t).norm() < 1e-9);
        assert!((tf.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!(tf.rmse < 1e-9);
    }
}

#[test]
fn yaw_scale_axis_is_world_z() {
    let mut rng = ChaCha8Rng::seed_from_u64(62);
    for _ in 0..50 {
        let src = cloud(&mut rng, 20);
        let rot = Rotation3::from_euler_angles(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-PI..PI));
        let dst: Vec<_> = src.iter().map(|p| rot * p * 2.0).collect();
        let r = umeyama_align(&src, &dst, AlignMode::YawScale).unwrap().rotation;
        for (i, j) in [(0, 2), (1, 2), (2, 0), (2, 1)] {
            assert_eq!(r[(i, j)], 0.0);
        }
        assert_eq!(r[(2, 2)], 1.0);
        assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-12);
    }
}

#[test]
fn yaw_scale_recovers_pure_yaw() {
    let mut rng = ChaCha8Rng::seed_from_u64(63);
    let src = cloud(&mut rng, 30);
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), 2.2);
    let t = Vector3::new(1.0, -2.0, 0.5);
    let dst: Vec<_> = src.iter().map(|p| rot * p * 0.7 + t).collect();
    let tf = umeyama_align(&src, &dst, AlignMode::YawScale).unwrap();
    assert!((tf.s - 0.7).abs() < 1e-12);
    assert!((tf.rotation - rot.matrix()).norm() < 1e-12);
    assert!((tf.t - t).norm() < 1e-12);
}

#[test]
fn degenerate_inputs() {
    let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
    assert_eq!(umeyama_align(&line, &line, AlignMode::Full), Err(AlignError::Degenerate));
    let vertical: Vec<_> = (0..5).map(|i| Vector3::new(0.0, 0.0, i as f64)).collect();
    assert_eq!(umeyama_align(&vertical, &vertical, AlignMode::YawScale), Err(AlignError::Degenerate));
    assert!(matches!(umeyama_align(&line[..2], &line[..2], AlignMode::Full), Err(AlignError::TooFewPoints(2))));
    assert!(matches!(umeyama_align(&line, &line[..3], AlignMode::Full), Err(AlignError::LengthMismatch { .. })));
}

fn perturbed(base: &Trajectory, sigma: f64, rng: &mut ChaCha8Rng) -> Trajectory {
    let poses = base
        .poses()
        .iter()
        .map(|p| {
            let c = p.position() + Vector3::new(rng.random_range(-sigma..sigma), rng.random_range(-sigma..sigma), 0.0);
            Pose { translation: -(p.rotation * c), ..*p }
        })
        .collect();
    Trajectory::new(poses).unwrap()
}

#[test]
fn self_match_ranks_first() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let target = synthetic_trajectory(81, 16.0, 3.0);
    let mut candidates: Vec<_> = [0.4, 0.1, 0.8, 0.2].iter().map(|&s| perturbed(&target, s, &mut rng)).collect();
    candidates.insert(2, target.clone());
    let matches = match_trajectories(&candidates, &target, 5).unwrap();
    assert_eq!(matches[0].index, 2);
    assert_eq!(matches[0].transform.rmse, 0.0);
    // Larger perturbations align worse.
    let order: Vec<_> = matches.iter().map(|m| m.index).collect();
    assert_eq!(order, vec![2, 1, 4, 0, 3]);
    assert!(match_trajectories(&candidates, &target, 6).is_err());
}

#[test]
fn ramp_offsets_hit_endpoints() {
    let traj = synthetic_trajectory(81, 16.0, 3.0);
    let constant = RotationOffset { yaw: 0.3, pitch: -0.2, roll: 0.1 };
    let start = RotationOffset { yaw: -1.0, pitch: 0.4, roll: 0.0 };
    let end = RotationOffset { yaw: 2.0, pitch: -0.5, roll: 0.6 };
    let (a, b) = augment_with_offsets(&traj, &constant, &start, &end).unwrap();
    let angle = |x: &UnitQuaternion<f64>, y: &UnitQuaternion<f64>| x.angle_to(y);
    for (p, q) in traj.poses().iter().zip(a.poses()) {
        assert!(angle(&(constant.quaternion() * p.rotation), &q.rotation) < 1e-12);
        assert!((q.position() - p.position()).norm() < 1e-9);
    }
    let (first, last) = (&b.poses()[0], &b.poses()[80]);
    assert!(angle(&(start.quaternion() * traj.poses()[0].rotation), &first.rotation) < 1e-12);
    assert!(angle(&(end.quaternion() * traj.poses()[80].rotation), &last.rotation) < 1e-12);
}
