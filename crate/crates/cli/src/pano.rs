use std::path::PathBuf;

use anyhow::Context;
use pfcal::datagen::{
    augment_rotations, derive_seed, generate_clip, match_trajectories, sample_camera_of, sample_model,
    synthetic_trajectory, ClipSpec, EquirectImage, Trajectory, DEFAULT_FPS, DEFAULT_FRAMES,
};
use pfcal::io::{read_trajectory_file, write_json};
use pfcal::{CameraIntrinsics, CameraModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{ensure_dir, ensure_files, parse_size, usage, Global, Status};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Equirectangular panorama (2:1).
    #[arg(long)]
    panorama: PathBuf,
    /// Candidate trajectory CSVs; a synthetic walk is used when none are given.
    #[arg(long = "trajectory")]
    trajectories: Vec<PathBuf>,
    /// Reference trajectory that candidates are matched against.
    #[arg(long)]
    target: Option<PathBuf>,
    /// Keep the K candidates that align best with --target.
    #[arg(long = "match", value_name = "K")]
    match_k: Option<usize>,
    /// Add a constant-offset and a ramped-offset rotation variant per clip.
    #[arg(long)]
    augment: bool,
    #[arg(long, default_value_t = DEFAULT_FRAMES)]
    frames: usize,
    #[arg(long, default_value_t = DEFAULT_FPS)]
    fps: f64,
    #[arg(long, default_value = "640x640", value_parser = parse_size)]
    image_size: (u32, u32),
    /// Camera model (drawn per clip when absent).
    #[arg(long)]
    model: Option<CameraModel>,
    /// Vertical FoV in degrees; needs --model.
    #[arg(long, requires = "model")]
    vfov: Option<f64>,
    /// Distortion (k1 or xi) used with --vfov.
    #[arg(long, requires = "vfov", allow_hyphen_values = true)]
    distortion: Option<f64>,
}

#[derive(Serialize)]
struct ClipEntry {
    clip_id: String,
    source: String,
    variant: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    match_rmse: Option<f64>,
    model: CameraModel,
}

fn clip_camera(a: &Args, rng: &mut ChaCha8Rng) -> anyhow::Result<CameraIntrinsics> {
    let (w, h) = a.image_size;
    Ok(match (a.model, a.vfov) {
        (Some(m), Some(v)) => CameraIntrinsics::from_vfov(m, w, h, v, a.distortion.unwrap_or(0.0))
            .map_err(|e| usage(e.to_string()))?,
        (Some(m), None) => sample_camera_of(rng, m, w, h).intrinsics,
        _ => {
            let model = sample_model(rng);
            sample_camera_of(rng, model, w, h).intrinsics
        }
    })
}

pub fn run(g: &Global, a: Args) -> anyhow::Result<Status> {
    ensure_files(std::slice::from_ref(&a.panorama))?;
    ensure_files(&a.trajectories)?;
    ensure_files(a.target.as_slice())?;
    if a.frames < 2 {
        return Err(usage("--frames must be at least 2"));
    }
    if a.match_k.is_some() && a.target.is_none() {
        return Err(usage("--match needs --target"));
    }
    ensure_dir(&g.out)?;

    let pano = EquirectImage::load(&a.panorama).with_context(|| format!("reading {}", a.panorama.display()))?;
    let pano_id = a.panorama.file_stem().map_or_else(|| "pano".into(), |s| s.to_string_lossy().into_owned());
    let mut sources: Vec<(String, Trajectory)> = a
        .trajectories
        .iter()
        .map(|p| {
            let t = read_trajectory_file(p).with_context(|| format!("reading {}", p.display()))?;
            Ok((p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), t))
        })
        .collect::<anyhow::Result<_>>()?;
    if sources.is_empty() {
        sources.push(("synthetic".into(), synthetic_trajectory(a.frames, a.fps, 2.0)));
    }

    let mut selected: Vec<(usize, Option<f64>)> = (0..sources.len()).map(|i| (i, None)).collect();
    if let (Some(k), Some(target)) = (a.match_k, &a.target) {
        let target = read_trajectory_file(target).with_context(|| format!("reading {}", target.display()))?;
        let candidates: Vec<Trajectory> = sources.iter().map(|(_, t)| t.clone()).collect();
        selected = match_trajectories(&candidates, &target, k)
            .map_err(|e| usage(e.to_string()))?
            .into_iter()
            .map(|m| (m.index, Some(m.transform.rmse)))
            .collect();
    }

    let mut index = Vec::new();
    for (n, (src, rmse)) in selected.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(g.seed, &[n as u64]));
        let cam = clip_camera(&a, &mut rng)?;
        let (name, traj) = &sources[src];
        let mut variants = vec![("base", traj.clone())];
        if a.augment {
            let (va, vb) = augment_rotations(traj, &mut rng)?;
            variants.push(("a", va));
            variants.push(("b", vb));
        }
        for (variant, t) in variants {
            let clip_id = match variant {
                "base" => format!("clip_{n:03}"),
                v => format!("clip_{n:03}_{v}"),
            };
            let mut spec = ClipSpec::new(&clip_id, &pano_id, g.seed);
            spec.frames = a.frames;
            spec.fps = a.fps;
            let manifest = generate_clip(&pano, &t, &cam, &spec, &g.out)?;
            println!("{clip_id}: {} frames from {name} ({variant}), {}", manifest.frame_count, cam.model());
            index.push(ClipEntry {
                clip_id,
                source: name.clone(),
                variant,
                match_rmse: rmse,
                model: cam.model(),
            });
        }
    }
    write_json(&g.out.join("clips.json"), &index)?;
    Ok(Status::Done)
}
