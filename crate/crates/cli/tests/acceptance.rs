use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3, Rotation3, Vector2, Vector3};
use pfcal::datagen::{
    camera_rotation, direction_to_lonlat, lonlat_to_direction, match_trajectories, random_gravity, sample_camera,
    sample_camera_of, sample_coordinates, synthetic_trajectory, umeyama_align, world_ray, AlignMode,
    DatasetManifest, Pose, Trajectory, UcmCategory, K1_LIMIT, MANIFEST_FILE, PERSPECTIVE_VFOV_DEG,
};
use pfcal::field::MODEL_INVALID_RESIDUAL;
use pfcal::io::{read_camera, read_json, read_pff_file};
use pfcal::study::{run_study, OptimizerMode, StudyConfig};
use pfcal::{
    auc_at, confidence_objective, field_jacobian, field_residual, gravity_angular_error, gravity_from_angles,
    render_fields, solve, tangent_update, CameraIntrinsics, CameraModel, GravityState, GridSpec, PerspectiveField,
    PixelPoint, SolveConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> String;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn round_trip() -> String {
    let mut worst = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (s, model) in CameraModel::ALL.into_iter().enumerate() {
        let mut rng = rng(100 + s as u64);
        for i in 0..20 {
            let gt = sample_camera_of(&mut rng, model, 640, 640).intrinsics;
            let g = random_gravity(&mut rng, FRAC_PI_4);
            let field = render_fields(&gt, &g, &GridSpec::for_image(640, 640)).unwrap();
            assert_eq!((field.width, field.height), (64, 64));
            let start = Instant::now();
            let est = solve(&[field], &SolveConfig::new(model)).unwrap();
            let secs = start.elapsed().as_secs_f64();
            let cam = est.intrinsics_for_view(0);
            let dv = (cam.vfov().unwrap() - gt.vfov().unwrap()).abs();
            let dg = gravity_angular_error(&est.gravities[0], &g);
            let dd = (cam.distortion() - gt.distortion()).abs();
            assert!(dv < 0.05 && dg < 0.02 && dd < 1e-3, "{model} #{i}: dvfov {dv:.2e} dg {dg:.2e} dd {dd:.2e}");
            assert!(secs < 1.0, "{model} #{i}: {secs:.2}s");
            worst = (worst.0.max(dv), worst.1.max(dg), worst.2.max(dd), worst.3.max(secs));
        }
    }
    format!(
        "worst dvfov {:.1e} deg, gravity {:.1e} deg, distortion {:.1e}, {:.3}s",
        worst.0, worst.1, worst.2, worst.3
    )
}

fn multi_view() -> String {
    let start = Instant::now();
    let rows = run_study(&StudyConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let median = |mode: OptimizerMode, n: usize| {
        rows.iter().find(|r| r.mode == mode && r.views == n).map(|r| r.median_focal_rel_err).unwrap()
    };
    let shared: Vec<f64> = [1, 2, 4, 8].iter().map(|&n| median(OptimizerMode::Shared, n)).collect();
    let independent: Vec<f64> = [1, 2, 4, 8].iter().map(|&n| median(OptimizerMode::Independent, n)).collect();
    assert!(shared.windows(2).all(|w| w[1] <= w[0]), "shared medians {shared:?}");
    assert!(shared[3] <= 0.7 * shared[0], "reduction {:.3}", 1.0 - shared[3] / shared[0]);
    for k in 1..4 {
        assert!(shared[k] < independent[k], "N index {k}: {} vs {}", shared[k], independent[k]);
    }
    assert!(secs < 120.0, "{secs:.1}s");
    format!("shared {shared:.4?}, independent {independent:.4?}, {secs:.1}s")
}

/// Largest normalized radius the model can unproject.
fn radius_limit(cam: &CameraIntrinsics) -> f64 {
    let d = cam.distortion();
    match cam.model() {
        CameraModel::SimpleRadial if d < 0.0 => {
            let r = (-1.0 / (3.0 * d)).sqrt();
            r * (1.0 + d * r * r)
        }
        CameraModel::Ucm if d > 1.0 => 1.0 / (d * d - 1.0).sqrt(),
        _ => f64::INFINITY,
    }
}

fn residual(obs: &PerspectiveField, cam: &CameraIntrinsics, g: &GravityState) -> Vec<Option<[f64; 3]>> {
    let r = field_residual(obs, cam, g).unwrap();
    let mut out = vec![None; obs.len()];
    for (k, &i) in r.samples.iter().enumerate() {
        let block = [r.values[3 * k], r.values[3 * k + 1], r.values[3 * k + 2]];
        if block != MODEL_INVALID_RESIDUAL {
            out[i] = Some(block);
        }
    }
    out
}

fn jacobian() -> String {
    const STEP: f64 = 1e-4;
    let grid = GridSpec::new(16);
    let mut worst = 0.0f64;
    for (s, model) in CameraModel::ALL.into_iter().enumerate() {
        let mut rng = rng(300 + s as u64);
        for instance in 0..10 {
            let cam = sample_camera_of(&mut rng, model, 320, 320).intrinsics;
            let g = random_gravity(&mut rng, FRAC_PI_4);
            let mut obs = PerspectiveField::empty(cam.width(), cam.height(), grid);
            obs.valid.iter_mut().for_each(|v| *v = true);
            let jac = field_jacobian(&cam, &g, &grid).unwrap();
            let (f, d) = (cam.focal(), cam.distortion());
            let with = |f: f64, d: f64| CameraIntrinsics::new(model, cam.width(), cam.height(), f, d).unwrap();
            let rot = |a: f64, b: f64| tangent_update(&g, &Vector2::new(a, b));
            let base = residual(&obs, &cam, &g);
            let probes = [
                (residual(&obs, &with(f * STEP.exp(), d), &g), residual(&obs, &with(f * (-STEP).exp(), d), &g)),
                if model.has_distortion() {
                    (residual(&obs, &with(f, d + STEP), &g), residual(&obs, &with(f, d - STEP), &g))
                } else {
                    (base.clone(), base.clone())
                },
                (residual(&obs, &cam, &rot(STEP, 0.0)), residual(&obs, &cam, &rot(-STEP, 0.0))),
                (residual(&obs, &cam, &rot(0.0, STEP)), residual(&obs, &cam, &rot(0.0, -STEP))),
            ];
            let limit = radius_limit(&cam);
            let mut oracle = DMatrix::zeros(jac.matrix.nrows(), 4);
            let mut analytic = DMatrix::zeros(jac.matrix.nrows(), 4);
            let mut used = 0;
            for i in 0..obs.len() {
                let radius = (obs.sample_pixel(i) - cam.principal_point()).norm() / f;
                if base[i].is_none() || !jac.valid[i] || radius > 0.9 * limit {
                    continue;
                }
                if probes.iter().any(|(p, m)| p[i].is_none() || m[i].is_none()) {
                    continue;
                }
                used += 1;
                for (c, (p, m)) in probes.iter().enumerate() {
                    let (p, m) = (p[i].unwrap(), m[i].unwrap());
                    for k in 0..3 {
                        oracle[(3 * i + k, c)] = (p[k] - m[k]) / (2.0 * STEP);
                        analytic[(3 * i + k, c)] = jac.matrix[(3 * i + k, c)];
                    }
                }
            }
            assert!(used > obs.len() / 4, "{model} #{instance}: {used} samples");
            let rel = (&analytic - &oracle).norm() / oracle.norm();
            assert!(rel < 1e-3, "{model} #{instance}: {rel:.2e}");
            worst = worst.max(rel);
        }
    }
    format!("worst relative Frobenius error {worst:.1e}")
}

fn auc() -> String {
    let mut rng = rng(400);
    let mut worst = 0.0f64;
    for set in 0..100 {
        let n = rng.random_range(1..40);
        let tau = rng.random_range(0.5..20.0);
        let mut errors: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.5 * tau)).collect();
        let closed = auc_at(&errors, tau).unwrap();
        errors.sort_by(f64::total_cmp);
        let steps = 1_000_000;
        let dt = tau / steps as f64;
        let (mut below, mut area) = (0, 0.0);
        for i in 0..steps {
            let t = (i as f64 + 0.5) * dt;
            while below < n && errors[below] <= t {
                below += 1;
            }
            area += below as f64 / n as f64 * dt;
        }
        let diff = (closed - area / tau).abs();
        assert!(diff < 1e-6, "set {set}: {diff:.2e}");
        worst = worst.max(diff);
    }
    assert_eq!(auc_at(&[0.5, 2.0, 6.0], 5.0).unwrap(), 0.5);
    format!("worst difference {worst:.1e}, example exactly 0.5")
}

fn umeyama() -> String {
    let mut rng = rng(500);
    let cloud = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Vector3<f64>> {
        (0..n).map(|_| Vector3::from_fn(|_, _| rng.random_range(-5.0..5.0))).collect()
    };
    for _ in 0..50 {
        let n = rng.random_range(3..40);
        let src = cloud(&mut rng, n);
        let axis = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        let rot = Rotation3::from_scaled_axis(axis * rng.random_range(-3.0..3.0));
        let s = rng.random_range(0.1..10.0);
        let t = Vector3::from_fn(|_, _| rng.random_range(-9.0..9.0));
        let dst: Vec<_> = src.iter().map(|p| rot * p * s + t).collect();
        let tf = umeyama_align(&src, &dst, AlignMode::Full).unwrap();
        assert!((tf.s - s).abs() < 1e-9 * s && (tf.rotation - rot.matrix()).norm() < 1e-9 && (tf.t - t).norm() < 1e-9);

        let tilted = Rotation3::from_euler_angles(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.4);
        let dst: Vec<_> = src.iter().map(|p| tilted * p * 2.0).collect();
        let r = umeyama_align(&src, &dst, AlignMode::YawScale).unwrap().rotation;
        assert!(r[(0, 2)] == 0.0 && r[(1, 2)] == 0.0 && r[(2, 0)] == 0.0 && r[(2, 1)] == 0.0 && r[(2, 2)] == 1.0);
    }

    let target = synthetic_trajectory(81, 16.0, 3.0);
    let mut candidates: Vec<Trajectory> = [0.4, 0.1, 0.8]
        .iter()
        .map(|&sigma| {
            let poses = target
                .poses()
                .iter()
                .map(|p| {
                    let c = p.position() + Vector3::new(rng.random_range(-sigma..sigma), rng.random_range(-sigma..sigma), 0.0);
                    Pose { translation: -(p.rotation * c), ..*p }
                })
                .collect();
            Trajectory::new(poses).unwrap()
        })
        .collect();
    candidates.insert(1, target.clone());
    let best = &match_trajectories(&candidates, &target, 4).unwrap()[0];
    assert_eq!((best.index, best.transform.rmse), (1, 0.0));
    "50 similarities recovered, yaw axis exactly +Z, self-match rmse 0".into()
}

fn reprojection() -> String {
    let mut rng = rng(600);
    let angle = |a: &Vector3<f64>, b: &Vector3<f64>| a.cross(b).norm().atan2(a.dot(b));
    let mut worst = 0.0f64;
    for model in CameraModel::ALL {
        let mut checked = 0;
        while checked < 1000 {
            let cam = sample_camera_of(&mut rng, model, 640, 480).intrinsics;
            let r = camera_rotation(rng.random_range(-PI..PI), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let p = PixelPoint::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let Ok(ray) = cam.unproject(&p) else { continue };
            let (lon, colat) = direction_to_lonlat(&world_ray(&cam, &r, &p).unwrap());
            worst = worst.max(angle(&(r * lonlat_to_direction(lon, colat)), &ray));
            checked += 1;
        }
        assert!(worst < 1e-6, "{model}: {worst:e} rad");

        let quarter = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let cam = sample_camera_of(&mut rng, model, 96, 64).intrinsics;
        let r = camera_rotation(rng.random_range(-PI..PI), 0.3, -0.2);
        let b = sample_coordinates(&cam, &(r * quarter.transpose()));
        for (a, b) in sample_coordinates(&cam, &r).iter().zip(&b) {
            if let (Some((la, ca)), Some((lb, _))) = (a, b) {
                if ca.sin() > 1e-6 {
                    let shift = (lb - la).rem_euclid(2.0 * PI);
                    assert!((shift - FRAC_PI_2).abs() < 1e-12, "{model}: shift {shift}");
                }
            }
        }
    }
    format!("worst round trip {worst:.1e} rad, quarter-turn shift exact to 1e-12")
}

/// Angle from the optical axis at normalized image radius `r`.
fn edge_angle(cam: &CameraIntrinsics, r: f64) -> f64 {
    let d = cam.distortion();
    match cam.model() {
        CameraModel::Pinhole => r.atan(),
        CameraModel::SimpleRadial => {
            let (mut lo, mut hi) = (0.0, if d < 0.0 { (-1.0 / (3.0 * d)).sqrt() } else { r });
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid * (1.0 + d * mid * mid) < r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            f64::atan(lo)
        }
        CameraModel::Ucm => {
            let eta = (d + (1.0 + (1.0 - d * d) * r * r).sqrt()) / (1.0 + r * r);
            (eta * r).atan2(eta - d)
        }
    }
}

fn sampler() -> String {
    const DRAWS: usize = 100_000;
    const TOL: f64 = 1e-6;
    let mut rng = rng(700);
    let mut counts = [0usize; 3];
    for _ in 0..DRAWS {
        let s = sample_camera(&mut rng);
        let cam = &s.intrinsics;
        assert_eq!((cam.width(), cam.height()), (640, 640));
        let half = |side: u32| 2.0 * edge_angle(cam, side as f64 / 2.0 / cam.focal()).to_degrees();
        match cam.model() {
            CameraModel::Ucm => {
                counts[0] += 1;
                let cat: UcmCategory = s.category.unwrap();
                let ((lo, hi), (xlo, xhi), fov) = (cat.hfov_range(), cat.xi_range(), half(cam.width()));
                assert!(fov >= lo - TOL && fov <= hi + TOL, "{cat:?} hfov {fov}");
                assert!(cam.distortion() >= xlo && cam.distortion() <= xhi);
            }
            model => {
                counts[if model == CameraModel::Pinhole { 1 } else { 2 }] += 1;
                let ((lo, hi), fov) = (PERSPECTIVE_VFOV_DEG, half(cam.height()));
                assert!(fov >= lo - TOL && fov <= hi + TOL, "{model} vfov {fov}");
                assert!(cam.distortion().abs() <= K1_LIMIT);
            }
        }
    }
    let shares: Vec<f64> = counts.iter().map(|&c| c as f64 / DRAWS as f64).collect();
    for (share, target) in shares.iter().zip([0.5, 0.25, 0.25]) {
        assert!((share - target).abs() <= 0.01, "{share} vs {target}");
    }
    format!("ucm/pinhole/radial shares {shares:.4?}")
}

fn pfcal(dir: &Path, threads: usize, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_pfcal"))
        .current_dir(dir)
        .env_remove("PFCAL_THREADS")
        .args(["--threads", &threads.to_string(), "-o", "out"])
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "pfcal {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_panorama(dir: &Path) {
    let img = image::RgbImage::from_fn(256, 128, |x, y| image::Rgb([x as u8, (2 * y) as u8, ((x ^ y) & 0xff) as u8]));
    img.save(dir.join("pano.png")).unwrap();
}

fn dataset() -> String {
    let dir = tempfile::tempdir().unwrap();
    write_panorama(dir.path());
    pfcal(dir.path(), 0, &["pano", "--panorama", "pano.png"]);
    let root = dir.path().join("out/clip_000");
    let manifest: DatasetManifest = read_json(&root.join(MANIFEST_FILE)).unwrap();
    assert_eq!((manifest.frame_count, manifest.frames.len()), (81, 81));
    assert_eq!((manifest.width, manifest.height), (640, 640));
    let cam = read_camera(&root.join(&manifest.camera_file)).unwrap();
    for frame in &manifest.frames {
        let img = image::open(root.join(&frame.image)).unwrap();
        assert_eq!((img.width(), img.height()), (640, 640));
        let field = read_pff_file(&root.join(&frame.field)).unwrap().into_field(640, 640).unwrap();
        let g = GravityState::from_unit(frame.gravity.into()).unwrap();
        let expected = render_fields(&cam, &g, &GridSpec::new(manifest.grid_stride)).unwrap();
        assert_eq!(field.valid, expected.valid);
    }
    format!("81 frames at 640x640, {} camera", cam.model())
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (hi - ratio * (hi - lo), lo + ratio * (hi - lo));
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-12 * hi.max(1.0) {
        if fa < fb {
            (hi, b, fb) = (b, a, fa);
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            (lo, a, fa) = (a, b, fb);
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

fn objective() -> String {
    let cam = CameraIntrinsics::pinhole(96, 64, 70.0).unwrap();
    let truth = render_fields(&cam, &gravity_from_angles(0.2, 1.1).unwrap(), &GridSpec::new(8)).unwrap();
    let mut perfect = truth.clone();
    perfect.confidence = Some(vec![1.0; perfect.len()]);
    assert_eq!(confidence_objective(&[perfect], &[truth.clone()], 1.0, 1.0).unwrap(), 0.0);

    let mut rng = rng(900);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 100 {
        let (gamma, alpha) = (rng.random_range(0.1..5.0), rng.random_range(0.1..5.0));
        let i = (0..truth.len()).filter(|&i| truth.valid[i]).nth(rng.random_range(0..truth.len() / 2)).unwrap();
        let mut pred = truth.clone();
        pred.up[i] = nalgebra::Rotation2::new(rng.random_range(-0.5..0.5)) * pred.up[i];
        pred.latitude[i] += rng.random_range(-0.3..0.3);
        let rho2 = (pred.up[i] - truth.up[i]).norm_squared() + (pred.latitude[i] - truth.latitude[i]).powi(2);
        if rho2 < 1e-4 {
            continue;
        }
        let closed = alpha / (gamma * rho2);
        let loss = |sigma: f64| {
            let mut p = pred.clone();
            let mut c = vec![1.0; p.len()];
            c[i] = sigma;
            p.confidence = Some(c);
            confidence_objective(&[p], std::slice::from_ref(&truth), gamma, alpha).unwrap()
        };
        let numeric = golden_min(loss, closed * 1e-3, closed * 1e3);
        let err = (numeric - closed).abs() / closed.max(1.0);
        assert!(err < 1e-6, "{numeric} vs {closed}");
        worst = worst.max(err);
        checked += 1;
    }
    format!("zero at perfect prediction, worst minimizer error {worst:.1e}")
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> String {
    let runs: [(&str, &[&str]); 6] = [
        ("synth", &["synth", "--model", "ucm", "--views", "4", "--noise-up", "5", "--noise-lat", "3"]),
        ("calibrate", &["calibrate", "--model", "ucm", "../a/out/view_000.pff", "../a/out/view_001.pff",
            "../a/out/view_002.pff", "../a/out/view_003.pff", "--trace", "out/trace.json"]),
        ("eval", &["eval", "--pred", "../a/out/gt.json", "--gt", "../a/out/gt.json"]),
        ("pano", &["pano", "--panorama", "../a/pano.png", "--frames", "6", "--image-size", "96x96", "--augment"]),
        ("study", &["study", "--trials", "10", "--views", "1,2", "--model", "mixed"]),
        ("selftest", &["selftest"]),
    ];
    let base = tempfile::tempdir().unwrap();
    let source = base.path().join("a");
    std::fs::create_dir(&source).unwrap();
    write_panorama(&source);
    pfcal(&source, 1, runs[0].1);
    let mut compared = 0;
    for (name, args) in runs {
        let dirs: Vec<PathBuf> = [1, 4]
            .iter()
            .map(|t| {
                let d = base.path().join(format!("{name}_{t}"));
                std::fs::create_dir(&d).unwrap();
                d
            })
            .collect();
        let one = pfcal(&dirs[0], 1, args);
        let four = pfcal(&dirs[1], 4, args);
        assert!(one.stdout == four.stdout, "{name}: stdout differs");
        let (a, b) = (tree(&dirs[0].join("out")), tree(&dirs[1].join("out")));
        assert!(!a.is_empty(), "{name}: no outputs");
        assert_eq!(a.len(), b.len(), "{name}: file count");
        for ((pa, da), (pb, db)) in a.iter().zip(&b) {
            assert!(pa == pb && da == db, "{name}: {} differs", pa.display());
        }
        compared += a.len();
    }
    format!("6 subcommands, {compared} files identical with 1 and 4 threads")
}

fn main() {
    let checks: [(&str, Check); 10] = [
        ("round-trip identifiability", round_trip),
        ("multi-view benefit", multi_view),
        ("jacobian correctness", jacobian),
        ("auc oracle equivalence", auc),
        ("umeyama alignment", umeyama),
        ("reprojection geometry", reprojection),
        ("sampler conformance", sampler),
        ("dataset defaults", dataset),
        ("confidence objective", objective),
        ("determinism across threads", determinism),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, (name, check)) in checks.into_iter().enumerate() {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(check));
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("[PASS] {}. {name}: {detail} ({secs:.1}s)", n + 1),
            Err(e) => {
                failed += 1;
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("[FAIL] {}. {name}: {msg} ({secs:.1}s)", n + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
