use anyhow::Context;
use pfcal::datagen::NoiseSpec;
use pfcal::study::{rows_to_csv, run_study, StudyConfig};
use pfcal::CameraModel;

use crate::{ensure_dir, parse_size, plot, usage, Global, Status};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// View counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    views: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Camera model, or "mixed" to draw one per trial.
    #[arg(long, default_value = "pinhole")]
    model: String,
    #[arg(long, default_value_t = 5.0)]
    noise_up: f64,
    #[arg(long, default_value_t = 3.0)]
    noise_lat: f64,
    /// Inverse-variance confidence ramp towards the image border.
    #[arg(long, default_value_t = 0.0)]
    ramp: f64,
    #[arg(long, default_value = "640x640", value_parser = parse_size)]
    image_size: (u32, u32),
    /// Largest random roll/pitch offset from upright, degrees.
    #[arg(long, default_value_t = 45.0)]
    max_tilt: f64,
}

pub fn run(g: &Global, a: Args) -> anyhow::Result<Status> {
    let model = match a.model.as_str() {
        "mixed" => None,
        m => Some(m.parse::<CameraModel>().map_err(|e| usage(e.to_string()))?),
    };
    let cfg = StudyConfig {
        model,
        views: a.views,
        trials: a.trials,
        noise: NoiseSpec::new(a.noise_up, a.noise_lat).with_ramp(a.ramp),
        seed: g.seed,
        image_size: a.image_size,
        max_tilt: a.max_tilt.to_radians(),
    };
    ensure_dir(&g.out)?;
    let rows = run_study(&cfg).map_err(|e| usage(e.to_string()))?;
    let csv = rows_to_csv(&rows)?;
    print!("{csv}");
    std::fs::write(g.out.join("study.csv"), csv).context("writing study.csv")?;
    plot::study_png(&g.out.join("study.png"), &rows)?;
    Ok(Status::Done)
}
