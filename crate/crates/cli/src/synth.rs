use anyhow::Context;
use pfcal::datagen::{add_field_noise, derive_seed, random_gravity, sample_camera_of, NoiseSpec};
use pfcal::io::{write_camera, write_pff_file, write_result, PffRecord, ResultJson};
use pfcal::{gravity_from_angles, render_fields, CameraIntrinsics, CameraModel, GravityState, GridSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{ensure_dir, parse_size, usage, Global, Status};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, default_value = "pinhole")]
    model: CameraModel,
    /// Vertical field of view in degrees (sampled when neither FoV is given).
    #[arg(long, conflicts_with = "hfov")]
    vfov: Option<f64>,
    /// Horizontal field of view in degrees.
    #[arg(long)]
    hfov: Option<f64>,
    /// Simple radial k1.
    #[arg(long)]
    k1: Option<f64>,
    /// UCM xi.
    #[arg(long)]
    xi: Option<f64>,
    /// Roll in degrees (requires --views 1).
    #[arg(long, allow_hyphen_values = true)]
    roll: Option<f64>,
    /// Pitch in degrees (requires --views 1).
    #[arg(long, allow_hyphen_values = true)]
    pitch: Option<f64>,
    #[arg(long, default_value = "640x640", value_parser = parse_size)]
    image_size: (u32, u32),
    /// Field samples along the longer image side.
    #[arg(long, default_value_t = 64)]
    grid: u32,
    #[arg(long, default_value_t = 1)]
    views: usize,
    /// Largest random roll/pitch offset from upright, degrees.
    #[arg(long, default_value_t = 45.0)]
    max_tilt: f64,
    /// Up-vector noise sigma in degrees.
    #[arg(long, default_value_t = 0.0)]
    noise_up: f64,
    /// Latitude noise sigma in degrees.
    #[arg(long, default_value_t = 0.0)]
    noise_lat: f64,
}

/// Smallest stride giving `samples` along the longer side.
fn grid_for(samples: u32, (w, h): (u32, u32)) -> anyhow::Result<GridSpec> {
    (1..=w.max(h))
        .map(GridSpec::new)
        .find(|g| {
            let (c, r) = g.dims(w, h);
            c.max(r) == samples
        })
        .ok_or_else(|| usage(format!("no grid stride gives {samples} samples on a {w}x{h} image")))
}

fn camera(a: &Args, rng: &mut ChaCha8Rng) -> anyhow::Result<CameraIntrinsics> {
    let (w, h) = a.image_size;
    let distortion = match a.model {
        CameraModel::Pinhole => 0.0,
        CameraModel::SimpleRadial => a.k1.unwrap_or(0.0),
        CameraModel::Ucm => a.xi.unwrap_or(1.0),
    };
    let cam = match (a.vfov, a.hfov) {
        (Some(v), _) => CameraIntrinsics::from_vfov(a.model, w, h, v, distortion),
        (None, Some(hf)) => CameraIntrinsics::from_hfov(a.model, w, h, hf, distortion),
        (None, None) => return Ok(sample_camera_of(rng, a.model, w, h).intrinsics),
    };
    cam.map_err(|e| usage(e.to_string()))
}

pub fn run(g: &Global, a: Args) -> anyhow::Result<Status> {
    if a.views == 0 {
        return Err(usage("--views must be positive"));
    }
    if (a.roll.is_some() || a.pitch.is_some()) && a.views != 1 {
        return Err(usage("--roll/--pitch need --views 1"));
    }
    if !(a.max_tilt >= 0.0 && a.max_tilt <= 90.0) {
        return Err(usage("--max-tilt must lie in [0, 90]"));
    }
    let noise = NoiseSpec::new(a.noise_up, a.noise_lat);
    noise.validate().map_err(|e| usage(e.to_string()))?;
    let grid = grid_for(a.grid, a.image_size)?;
    ensure_dir(&g.out)?;

    let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
    let cam = camera(&a, &mut rng)?;
    grid.validate(cam.width(), cam.height()).map_err(|e| usage(e.to_string()))?;
    let gravities: Vec<GravityState> = if a.roll.is_some() || a.pitch.is_some() {
        let (r, p) = (a.roll.unwrap_or(0.0), a.pitch.unwrap_or(90.0));
        vec![gravity_from_angles(r.to_radians(), p.to_radians()).map_err(|e| usage(e.to_string()))?]
    } else {
        (0..a.views).map(|_| random_gravity(&mut rng, a.max_tilt.to_radians())).collect()
    };

    for (v, gv) in gravities.iter().enumerate() {
        let mut field = render_fields(&cam, gv, &grid)?;
        if !noise.is_zero() {
            let mut view_rng = ChaCha8Rng::seed_from_u64(derive_seed(g.seed, &[v as u64]));
            field = add_field_noise(&field, &noise, &mut view_rng)?;
        }
        let path = g.out.join(format!("view_{v:03}.pff"));
        write_pff_file(&path, &PffRecord::from_field(&field)).with_context(|| format!("writing {}", path.display()))?;
    }
    write_camera(&g.out.join("camera.json"), &cam)?;
    write_result(&g.out.join("gt.json"), &ResultJson::ground_truth(&cam, &gravities))?;
    println!(
        "{} view(s), {} f={:.3} d={:.4}, {}x{} samples -> {}",
        gravities.len(),
        cam.model(),
        cam.focal(),
        cam.distortion(),
        grid.dims(cam.width(), cam.height()).0,
        grid.dims(cam.width(), cam.height()).1,
        g.out.display()
    );
    Ok(Status::Done)
}
