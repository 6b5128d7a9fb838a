//! Monte-Carlo study of focal accuracy versus number of views, comparing
//! shared-intrinsics and independent per-view optimization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::camera::CameraModel;
use crate::datagen::{add_field_noise, derive_seed, random_gravity, sample_camera_of, sample_model, NoiseSpec};
use crate::field::{render_fields, GridSpec, PerspectiveField};
use crate::gravity::{gravity_angular_error, GravityState};
use crate::solver::{solve, CalibrationEstimate, SolveConfig};

pub const MIN_TRIALS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StudyError {
    #[error("at least {MIN_TRIALS} trials are required, got {0}")]
    TooFewTrials(usize),
    #[error("view counts must be positive and non-empty")]
    Views,
    #[error(transparent)]
    Noise(#[from] crate::datagen::NoiseError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    /// Fixed camera model, or `None` to draw the model per trial.
    pub model: Option<CameraModel>,
    pub views: Vec<usize>,
    pub trials: usize,
    pub noise: NoiseSpec,
    pub seed: u64,
    pub image_size: (u32, u32),
    /// Largest pitch and roll offset from an upright camera (radians).
    pub max_tilt: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            model: Some(CameraModel::Pinhole),
            views: vec![1, 2, 4, 8],
            trials: 50,
            noise: NoiseSpec::new(5.0, 3.0),
            seed: 0,
            image_size: (640, 640),
            max_tilt: std::f64::consts::FRAC_PI_4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerMode {
    Shared,
    Independent,
}

impl OptimizerMode {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerMode::Shared => "shared",
            OptimizerMode::Independent => "independent",
        }
    }
}

/// Aggregate over trials for one `(views, mode)` cell. Failed solves are
/// counted and left out of the statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRow {
    pub views: usize,
    pub mode: OptimizerMode,
    pub trials: usize,
    pub failures: usize,
    pub median_focal_rel_err: f64,
    pub mean_focal_rel_err: f64,
    pub median_gravity_err_deg: f64,
    pub mean_gravity_err_deg: f64,
}

/// Per-trial errors for one cell: `(focal relative error, mean gravity error in degrees)`.
type CellErrors = Option<(f64, f64)>;

struct Trial {
    shared: Vec<CellErrors>,
    independent: Vec<CellErrors>,
}

fn cell_errors(est: &CalibrationEstimate, f_gt: f64, gravities: &[GravityState]) -> (f64, f64) {
    let n = gravities.len() as f64;
    let focal = (0..gravities.len())
        .map(|i| (est.intrinsics_for_view(i).focal() - f_gt).abs() / f_gt)
        .sum::<f64>()
        / n;
    let grav = est
        .gravities
        .iter()
        .zip(gravities)
        .map(|(a, b)| gravity_angular_error(a, b))
        .sum::<f64>()
        / n;
    (focal, grav)
}

fn run_trial(cfg: &StudyConfig, trial: usize) -> Trial {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[trial as u64]));
    let model = cfg.model.unwrap_or_else(|| sample_model(&mut rng));
    let (w, h) = cfg.image_size;
    let cam = sample_camera_of(&mut rng, model, w, h).intrinsics;
    let max_views = cfg.views.iter().copied().max().unwrap_or(1);
    let grid = GridSpec::for_image(w, h);
    let gravities: Vec<GravityState> = (0..max_views).map(|_| random_gravity(&mut rng, cfg.max_tilt)).collect();
    let fields: Vec<PerspectiveField> = gravities
        .iter()
        .enumerate()
        .map(|(v, g)| {
            let clean = render_fields(&cam, g, &grid).expect("grid fits the image");
            let mut view_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[trial as u64, v as u64 + 1]));
            add_field_noise(&clean, &cfg.noise, &mut view_rng).expect("noise validated")
        })
        .collect();
    let solver = SolveConfig::new(model);
    let f_gt = cam.focal();

    let shared = cfg
        .views
        .iter()
        .map(|&n| {
            solve(&fields[..n], &solver)
                .ok()
                .map(|est| cell_errors(&est, f_gt, &gravities[..n]))
        })
        .collect();
    // Independent solves do not interact, so one run over all views serves
    // every prefix.
    let all = solve(&fields, &solver.clone().independent()).ok();
    let independent = cfg
        .views
        .iter()
        .map(|&n| {
            all.as_ref().map(|est| {
                let mut e = est.clone();
                e.gravities.truncate(n);
                cell_errors(&e, f_gt, &gravities[..n])
            })
        })
        .collect();
    Trial { shared, independent }
}

fn stats(values: &mut [f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    };
    (median, values.iter().sum::<f64>() / n as f64)
}

/// Runs every trial and returns one row per view count and mode, shared
/// rows first.
pub fn run_study(cfg: &StudyConfig) -> Result<Vec<StudyRow>, StudyError> {
    if cfg.trials < MIN_TRIALS {
        return Err(StudyError::TooFewTrials(cfg.trials));
    }
    if cfg.views.is_empty() || cfg.views.contains(&0) {
        return Err(StudyError::Views);
    }
    cfg.noise.validate()?;
    let trials: Vec<Trial> = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect();
    let mut rows = Vec::new();
    for mode in [OptimizerMode::Shared, OptimizerMode::Independent] {
        for (j, &n) in cfg.views.iter().enumerate() {
            let cells: Vec<(f64, f64)> = trials
                .iter()
                .filter_map(|t| match mode {
                    OptimizerMode::Shared => t.shared[j],
                    OptimizerMode::Independent => t.independent[j],
                })
                .collect();
            let (mf, af) = stats(&mut cells.iter().map(|c| c.0).collect::<Vec<_>>());
            let (mg, ag) = stats(&mut cells.iter().map(|c| c.1).collect::<Vec<_>>());
            rows.push(StudyRow {
                views: n,
                mode,
                trials: cfg.trials,
                failures: cfg.trials - cells.len(),
                median_focal_rel_err: mf,
                mean_focal_rel_err: af,
                median_gravity_err_deg: mg,
                mean_gravity_err_deg: ag,
            });
        }
    }
    Ok(rows)
}

/// CSV text with a header row.
pub fn rows_to_csv(rows: &[StudyRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn too_few_trials_is_rejected() {
        let cfg = StudyConfig {
            trials: 9,
            ..StudyConfig::default()
        };
        assert_eq!(run_study(&cfg), Err(StudyError::TooFewTrials(9)));
    }

    #[test]
    fn small_study_has_one_row_per_cell() {
        let cfg = StudyConfig {
            trials: 10,
            views: vec![1, 2],
            image_size: (128, 128),
            ..StudyConfig::default()
        };
        let rows = run_study(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].mode, OptimizerMode::Shared);
        assert_eq!(rows[3].mode, OptimizerMode::Independent);
        let csv = rows_to_csv(&rows).unwrap();
        assert!(csv.starts_with("views,mode,trials,failures,median_focal_rel_err"));
        assert_eq!(csv.lines().count(), 5);
    }
}
