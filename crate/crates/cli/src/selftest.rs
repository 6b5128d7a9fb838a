use anyhow::Context;
use pfcal::datagen::{derive_seed, random_gravity, sample_camera_of};
use pfcal::io::{read_pff, write_pff, PffRecord};
use pfcal::{auc_at, gravity_angular_error, render_fields, solve, CameraModel, GridSpec, SolveConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{ensure_dir, Global, Status};

fn round_trip(model: CameraModel, seed: u64) -> anyhow::Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = sample_camera_of(&mut rng, model, 320, 320).intrinsics;
    let g = random_gravity(&mut rng, std::f64::consts::FRAC_PI_4);
    let field = render_fields(&cam, &g, &GridSpec::for_image(320, 320))?;
    let est = solve(&[field], &SolveConfig::new(model))?;
    let got = est.intrinsics_for_view(0);
    let dv = (got.vfov()? - cam.vfov()?).abs();
    let dg = gravity_angular_error(&est.gravities[0], &g);
    let dd = (got.distortion() - cam.distortion()).abs();
    anyhow::ensure!(dv < 0.05 && dg < 0.02 && dd < 1e-3, "dvfov {dv:.2e} dg {dg:.2e} dd {dd:.2e}");
    Ok(format!("dvfov {dv:.1e} deg, gravity {dg:.1e} deg"))
}

fn pff_fixpoint(seed: u64) -> anyhow::Result<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam = sample_camera_of(&mut rng, CameraModel::Ucm, 160, 120).intrinsics;
    let field = render_fields(&cam, &random_gravity(&mut rng, 0.5), &GridSpec::new(4))?;
    let mut first = Vec::new();
    write_pff(&mut first, &PffRecord::from_field(&field))?;
    let mut second = Vec::new();
    write_pff(&mut second, &read_pff(first.as_slice())?)?;
    anyhow::ensure!(first == second, "rewrite differs");
    Ok(format!("{} bytes", first.len()))
}

fn auc_example() -> anyhow::Result<String> {
    let v = auc_at(&[0.5, 2.0, 6.0], 5.0)?;
    anyhow::ensure!(v == 0.5, "got {v}");
    Ok("AUC@5 of [0.5, 2, 6] = 0.5".into())
}

pub fn run(g: &Global) -> anyhow::Result<Status> {
    ensure_dir(&g.out)?;
    let mut checks: Vec<(String, anyhow::Result<String>)> = CameraModel::ALL
        .iter()
        .enumerate()
        .map(|(i, &m)| (format!("round trip {m}"), round_trip(m, derive_seed(g.seed, &[i as u64]))))
        .collect();
    checks.push(("pff rewrite".into(), pff_fixpoint(derive_seed(g.seed, &[99]))));
    checks.push(("auc example".into(), auc_example()));

    let mut text = String::new();
    let mut failed = 0;
    for (name, res) in &checks {
        let line = match res {
            Ok(detail) => format!("[PASS] {name}: {detail}\n"),
            Err(e) => {
                failed += 1;
                format!("[FAIL] {name}: {e:#}\n")
            }
        };
        text.push_str(&line);
    }
    print!("{text}");
    std::fs::write(g.out.join("selftest.txt"), &text).context("writing selftest.txt")?;
    anyhow::ensure!(failed == 0, "{failed} self-test check(s) failed");
    Ok(Status::Done)
}
