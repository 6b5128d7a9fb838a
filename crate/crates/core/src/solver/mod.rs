//! Recovery of camera intrinsics and per-view gravity from observed
//! perspective fields.
//!
//! The solver minimizes the confidence-weighted squared difference between
//! observed fields and the fields rendered from candidate parameters with
//! Levenberg-Marquardt. Intrinsics are parameterized as `(log f, distortion)`;
//! each view's gravity lives on the unit sphere and is updated through
//! [`crate::gravity::tangent_update`]. With `shared_intrinsics` all views share
//! one camera; otherwise every view is solved on its own.

mod lm;
mod objective;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::camera::{CameraError, CameraIntrinsics, CameraModel};
use crate::field::{model_invalid_count, FieldError, PerspectiveField};
use crate::gravity::GravityState;

pub use lm::TraceEntry;
pub use objective::{confidence_objective, ObjectiveError};

/// Minimum number of usable samples per view.
pub const MIN_SAMPLES_PER_VIEW: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no input fields")]
    NoFields,
    #[error("view {view}: {usable} usable samples, need at least {MIN_SAMPLES_PER_VIEW}")]
    TooFewSamples { view: usize, usable: usize },
    #[error("view {view}: mean up vector vanishes, cannot initialize roll")]
    DegenerateUp { view: usize },
    #[error("views have different image sizes or sampling grids")]
    MixedSampling,
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("non-finite residuals in view {view}")]
    NonFinite { view: usize },
    #[error("normal equations could not be solved (damping {lambda:e})")]
    LinearSolve { lambda: f64 },
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Levenberg-Marquardt settings.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveConfig {
    pub model: CameraModel,
    pub shared_intrinsics: bool,
    pub max_iters: usize,
    pub lambda_init: f64,
    pub lambda_decrease: f64,
    pub lambda_increase: f64,
    pub step_tol: f64,
    pub cost_tol: f64,
    pub init_vfov_deg: f64,
    /// Huber threshold on confidence-scaled residual components.
    pub huber_delta: Option<f64>,
}

impl SolveConfig {
    pub fn new(model: CameraModel) -> Self {
        Self {
            model,
            shared_intrinsics: true,
            max_iters: 100,
            lambda_init: 1e-2,
            lambda_decrease: 0.3,
            lambda_increase: 5.0,
            step_tol: 1e-8,
            cost_tol: 1e-10,
            init_vfov_deg: 55.0,
            huber_delta: None,
        }
    }

    pub fn independent(mut self) -> Self {
        self.shared_intrinsics = false;
        self
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Config(m.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.lambda_init > 0.0 && self.step_tol > 0.0 && self.cost_tol > 0.0) {
            return bad("damping and tolerances must be positive");
        }
        if !(self.lambda_decrease > 0.0 && self.lambda_decrease < 1.0) {
            return bad("lambda_decrease must lie in (0, 1)");
        }
        if !(self.lambda_increase > 1.0) {
            return bad("lambda_increase must exceed 1");
        }
        if !(self.init_vfov_deg > 1.0 && self.init_vfov_deg < 180.0) {
            return bad("init_vfov_deg must lie in (1, 180)");
        }
        if let Some(d) = self.huber_delta {
            if !(d > 0.0) {
                return bad("huber_delta must be positive");
            }
        }
        Ok(())
    }
}

/// Starting point of a solve.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialGuess {
    pub intrinsics: CameraIntrinsics,
    pub gravities: Vec<GravityState>,
}

/// Recovered intrinsics: one camera for the sequence, or one per view when
/// the views were solved independently.
#[derive(Clone, Debug, PartialEq)]
pub enum IntrinsicsEstimate {
    Shared(CameraIntrinsics),
    PerView(Vec<CameraIntrinsics>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationEstimate {
    pub intrinsics: IntrinsicsEstimate,
    pub gravities: Vec<GravityState>,
    /// Weighted sum of squared residuals over all views.
    pub final_cost: f64,
    /// LM iterations; the maximum over views in independent mode.
    pub iterations: usize,
    pub converged: bool,
    pub per_view_rms: Vec<f64>,
    /// One trace per LM run (a single run in shared mode).
    pub traces: Vec<Vec<TraceEntry>>,
}

impl CalibrationEstimate {
    pub fn view_count(&self) -> usize {
        self.gravities.len()
    }

    /// Intrinsics that apply to view `i`.
    pub fn intrinsics_for_view(&self, i: usize) -> &CameraIntrinsics {
        match &self.intrinsics {
            IntrinsicsEstimate::Shared(c) => c,
            IntrinsicsEstimate::PerView(v) => &v[i],
        }
    }
}

fn check_inputs(fields: &[PerspectiveField]) -> Result<(), SolveError> {
    let first = fields.first().ok_or(SolveError::NoFields)?;
    if fields.iter().any(|f| !first.same_sampling(f)) {
        return Err(SolveError::MixedSampling);
    }
    for (view, f) in fields.iter().enumerate() {
        f.validate()?;
        let usable = f.usable_count();
        if usable < MIN_SAMPLES_PER_VIEW {
            return Err(SolveError::TooFewSamples { view, usable });
        }
    }
    Ok(())
}

/// Coarse gravity from the central quarter of a field: the weighted mean
/// latitude there approximates `asin(g_z)` and the weighted mean up vector
/// points along `(g_x, g_y)`.
fn coarse_gravity(field: &PerspectiveField, view: usize) -> Result<GravityState, SolveError> {
    let (w, h) = (field.width, field.height);
    let in_centre = |i: usize| {
        let (col, row) = ((i % w as usize) as u32, (i / w as usize) as u32);
        col >= w / 4 && col < w - w / 4 && row >= h / 4 && row < h - h / 4
    };
    let accumulate = |select: &dyn Fn(usize) -> bool| {
        let mut sum_w = 0.0;
        let mut lat = 0.0;
        let mut up = Vector2::zeros();
        for i in (0..field.len()).filter(|&i| field.is_usable(i) && select(i)) {
            let wi = field.weight(i);
            sum_w += wi;
            lat += wi * field.latitude[i];
            up += field.up[i] * wi;
        }
        (sum_w, lat, up)
    };
    let (mut sum_w, mut lat, mut up) = accumulate(&in_centre);
    if sum_w <= 0.0 {
        (sum_w, lat, up) = accumulate(&|_| true);
    }
    if sum_w <= 0.0 {
        return Err(SolveError::TooFewSamples { view, usable: 0 });
    }
    let mean_lat = lat / sum_w;
    let mean_up = up / sum_w;
    let n = mean_up.norm();
    if !(n > 1e-9) {
        return Err(SolveError::DegenerateUp { view });
    }
    let gz = mean_lat.sin();
    let horizontal = mean_lat.cos() / n;
    Ok(GravityState::new(Vector3::new(
        mean_up.x * horizontal,
        mean_up.y * horizontal,
        gz,
    ))
    .expect("unit by construction"))
}

/// Initial intrinsics (from `init_vfov_deg`, zero radial distortion or
/// `xi = 1`) and a coarse gravity per view.
pub fn initialize(fields: &[PerspectiveField], cfg: &SolveConfig) -> Result<InitialGuess, SolveError> {
    cfg.validate()?;
    check_inputs(fields)?;
    let first = &fields[0];
    let distortion = match cfg.model {
        CameraModel::Ucm => 1.0,
        _ => 0.0,
    };
    let intrinsics = CameraIntrinsics::from_vfov(
        cfg.model,
        first.image_width,
        first.image_height,
        cfg.init_vfov_deg,
        distortion,
    )?;
    let gravities = fields
        .iter()
        .enumerate()
        .map(|(view, f)| coarse_gravity(f, view))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(InitialGuess { intrinsics, gravities })
}

/// Gravity from a weighted linear fit of `sin(latitude) = ray . g` under a
/// candidate camera.
fn fit_gravity_to_latitudes(field: &PerspectiveField, cam: &CameraIntrinsics) -> Option<GravityState> {
    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for i in (0..field.len()).filter(|&i| field.is_usable(i)) {
        let Ok(ray) = cam.unproject(&field.sample_pixel(i)) else {
            continue;
        };
        let w = field.weight(i);
        a += ray * ray.transpose() * w;
        b += ray * (w * field.latitude[i].sin());
    }
    let g = a.cholesky()?.solve(&b);
    GravityState::new(g).ok()
}

fn search_candidates(model: CameraModel) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    match model {
        CameraModel::Pinhole => {
            for fov in [15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 80.0, 95.0, 110.0, 130.0, 150.0] {
                out.push((fov, 0.0));
            }
        }
        CameraModel::SimpleRadial => {
            for fov in [15.0, 25.0, 35.0, 45.0, 55.0, 65.0, 80.0, 95.0, 110.0, 130.0] {
                for k1 in [-0.4, -0.2, 0.0, 0.2, 0.4] {
                    out.push((fov, k1));
                }
            }
        }
        CameraModel::Ucm => {
            for fov in [40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 155.0, 170.0, 185.0, 195.0] {
                for xi in [0.25, 0.75, 1.25, 1.75, 2.25, 2.75] {
                    out.push((fov, xi));
                }
            }
        }
    }
    out
}

/// Scores the default starting point and a fixed grid of fields of view and
/// distortions (each with its least-squares gravity), lowest cost first.
/// Ties keep the earlier candidate, the default first.
pub fn ranked_starts(
    fields: &[PerspectiveField],
    cfg: &SolveConfig,
    default: InitialGuess,
) -> Result<Vec<InitialGuess>, SolveError> {
    check_inputs(fields)?;
    let first = &fields[0];
    let mut candidates = vec![default];
    candidates.extend(search_candidates(cfg.model).into_iter().filter_map(|(fov, d)| {
        let cam = CameraIntrinsics::from_vfov(cfg.model, first.image_width, first.image_height, fov, d).ok()?;
        let gravities = fields
            .iter()
            .map(|f| fit_gravity_to_latitudes(f, &cam))
            .collect::<Option<Vec<_>>>()?;
        Some(InitialGuess {
            intrinsics: cam,
            gravities,
        })
    }));
    let scores: Vec<f64> = candidates
        .par_iter()
        .map(|g| lm::total_cost(fields, &g.intrinsics, &g.gravities, cfg.huber_delta).unwrap_or(f64::INFINITY))
        .collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    Ok(order.into_iter().map(|i| candidates[i].clone()).collect())
}

/// Lowest-cost entry of [`ranked_starts`].
pub fn coarse_search(
    fields: &[PerspectiveField],
    cfg: &SolveConfig,
    default: InitialGuess,
) -> Result<InitialGuess, SolveError> {
    Ok(ranked_starts(fields, cfg, default)?.swap_remove(0))
}

/// Number of ranked starts tried when a run ends unconverged or with
/// observed samples outside the model's domain.
pub const MAX_STARTS: usize = 4;

/// Runs LM from the ranked starts and keeps the lowest final cost. Stops at
/// the first converged run whose camera can model every observed sample.
fn solve_multistart(
    fields: &[PerspectiveField],
    cfg: &SolveConfig,
    default: InitialGuess,
) -> Result<CalibrationEstimate, SolveError> {
    let mut best: Option<CalibrationEstimate> = None;
    let mut last_err = None;
    for start in ranked_starts(fields, cfg, default)?.iter().take(MAX_STARTS) {
        match solve_from(fields, cfg, start) {
            Ok(est) => {
                let cam = est.intrinsics_for_view(0);
                let clean = est.converged
                    && fields
                        .iter()
                        .zip(&est.gravities)
                        .all(|(f, g)| model_invalid_count(f, cam, g) == 0);
                if best.as_ref().is_none_or(|b| est.final_cost < b.final_cost) {
                    best = Some(est);
                }
                if clean {
                    break;
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one start"))
}

/// Solves for intrinsics and gravities. Starts come from [`initialize`] and
/// a coarse grid search; see [`ranked_starts`].
pub fn solve(fields: &[PerspectiveField], cfg: &SolveConfig) -> Result<CalibrationEstimate, SolveError> {
    let default = initialize(fields, cfg)?;
    if cfg.shared_intrinsics || fields.len() == 1 {
        let order = canonical_order(fields);
        let start = InitialGuess {
            intrinsics: default.intrinsics,
            gravities: permute(&default.gravities, &order),
        };
        let est = solve_multistart(&permute(fields, &order), cfg, start)?;
        return Ok(restore_order(est, &order));
    }
    let per_view = fields
        .par_iter()
        .zip(default.gravities.par_iter())
        .map(|(f, g)| {
            let single = InitialGuess {
                intrinsics: default.intrinsics,
                gravities: vec![*g],
            };
            solve_multistart(std::slice::from_ref(f), cfg, single)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(merge_independent(per_view))
}

fn merge_independent(runs: Vec<CalibrationEstimate>) -> CalibrationEstimate {
    let mut estimate = CalibrationEstimate {
        intrinsics: IntrinsicsEstimate::PerView(Vec::with_capacity(runs.len())),
        gravities: Vec::with_capacity(runs.len()),
        final_cost: 0.0,
        iterations: 0,
        converged: true,
        per_view_rms: Vec::with_capacity(runs.len()),
        traces: Vec::with_capacity(runs.len()),
    };
    for run in runs {
        if let IntrinsicsEstimate::PerView(v) = &mut estimate.intrinsics {
            v.push(*run.intrinsics_for_view(0));
        }
        estimate.gravities.push(run.gravities[0]);
        estimate.final_cost += run.final_cost;
        estimate.iterations = estimate.iterations.max(run.iterations);
        estimate.converged &= run.converged;
        estimate.per_view_rms.push(run.per_view_rms[0]);
        estimate.traces.extend(run.traces);
    }
    estimate
}

/// Content key of a view built from its usable samples only, so a sample
/// with zero confidence and a deleted sample give the same key.
fn view_key(field: &PerspectiveField) -> u64 {
    let mut h = DefaultHasher::new();
    for i in (0..field.len()).filter(|&i| field.is_usable(i)) {
        i.hash(&mut h);
        for v in [field.up[i].x, field.up[i].y, field.latitude[i], field.weight(i)] {
            v.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

/// Views sorted by content. Shared solves reduce across views in this
/// order, so the estimate does not depend on the order views are passed in.
fn canonical_order(fields: &[PerspectiveField]) -> Vec<usize> {
    let keys: Vec<u64> = fields.iter().map(view_key).collect();
    let mut order: Vec<usize> = (0..fields.len()).collect();
    order.sort_by_key(|&i| (keys[i], i));
    order
}

fn permute<T: Clone>(items: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| items[i].clone()).collect()
}

/// Maps per-view outputs of a solve over `permute(fields, order)` back to
/// input order.
fn restore_order(mut est: CalibrationEstimate, order: &[usize]) -> CalibrationEstimate {
    let mut gravities = est.gravities.clone();
    let mut rms = est.per_view_rms.clone();
    for (k, &i) in order.iter().enumerate() {
        gravities[i] = est.gravities[k];
        rms[i] = est.per_view_rms[k];
    }
    est.gravities = gravities;
    est.per_view_rms = rms;
    est
}

/// Solves from an explicit starting point.
pub fn solve_from(
    fields: &[PerspectiveField],
    cfg: &SolveConfig,
    init: &InitialGuess,
) -> Result<CalibrationEstimate, SolveError> {
    cfg.validate()?;
    check_inputs(fields)?;
    if init.gravities.len() != fields.len() || init.intrinsics.model() != cfg.model {
        return Err(SolveError::Config("initial guess does not match the inputs".into()));
    }
    if cfg.shared_intrinsics || fields.len() == 1 {
        let order = canonical_order(fields);
        let run = lm::run(&permute(fields, &order), cfg, init.intrinsics, &permute(&init.gravities, &order))?;
        let est = CalibrationEstimate {
            intrinsics: IntrinsicsEstimate::Shared(run.intrinsics),
            gravities: run.gravities,
            final_cost: run.cost,
            iterations: run.iterations,
            converged: run.converged,
            per_view_rms: run.per_view_rms,
            traces: vec![run.trace],
        };
        return Ok(restore_order(est, &order));
    }

    let runs = fields
        .par_iter()
        .zip(init.gravities.par_iter())
        .map(|(f, g)| {
            let single = InitialGuess {
                intrinsics: init.intrinsics,
                gravities: vec![*g],
            };
            solve_from(std::slice::from_ref(f), cfg, &single)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(merge_independent(runs))
}

/// Diagnostics of one LM run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunDiagnostics {
    /// Cost after initialization followed by the cost of every accepted step.
    pub cost_trace: Vec<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub steps: Vec<TraceEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagReport {
    pub converged: bool,
    pub iterations: usize,
    pub final_cost: f64,
    pub per_view_rms: Vec<f64>,
    pub runs: Vec<RunDiagnostics>,
}

pub fn diag_report(estimate: &CalibrationEstimate) -> DiagReport {
    let runs = estimate
        .traces
        .iter()
        .map(|trace| {
            let cost_trace = trace.iter().filter(|e| e.accepted).map(|e| e.cost).collect();
            let accepted = trace.iter().filter(|e| e.accepted && e.iteration > 0).count();
            RunDiagnostics {
                cost_trace,
                accepted_steps: accepted,
                rejected_steps: trace.len() - 1 - accepted,
                steps: trace.clone(),
            }
        })
        .collect();
    DiagReport {
        converged: estimate.converged,
        iterations: estimate.iterations,
        final_cost: estimate.final_cost,
        per_view_rms: estimate.per_view_rms.clone(),
        runs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{render_fields, GridSpec};
    use crate::gravity::{gravity_angular_error, gravity_from_angles};

    fn synthetic(model: CameraModel, vfov: f64, d: f64, gravities: &[GravityState]) -> (CameraIntrinsics, Vec<PerspectiveField>) {
        let cam = CameraIntrinsics::from_vfov(model, 640, 640, vfov, d).unwrap();
        let grid = GridSpec::for_image(640, 640);
        let fields = gravities.iter().map(|g| render_fields(&cam, g, &grid).unwrap()).collect();
        (cam, fields)
    }

    #[test]
    fn coarse_gravity_is_close() {
        let g = gravity_from_angles(0.3, 0.5).unwrap();
        for model in CameraModel::ALL {
            let d = if model == CameraModel::Ucm { 1.0 } else { 0.0 };
            let (_, fields) = synthetic(model, 70.0, d, &[g]);
            let init = initialize(&fields, &SolveConfig::new(model)).unwrap();
            assert!(gravity_angular_error(&init.gravities[0], &g) < 15.0);
        }
    }

    #[test]
    fn degenerate_up_field_errors() {
        let g = gravity_from_angles(0.3, 0.5).unwrap();
        let (_, mut fields) = synthetic(CameraModel::Pinhole, 60.0, 0.0, &[g]);
        fields[0].up.iter_mut().for_each(|u| *u = Vector2::zeros());
        // Zero up vectors are not unit; bypass validation by checking the helper directly.
        assert!(matches!(coarse_gravity(&fields[0], 0), Err(SolveError::DegenerateUp { .. })));
    }

    #[test]
    fn all_invalid_field_errors() {
        let g = gravity_from_angles(0.3, 0.5).unwrap();
        let (_, mut fields) = synthetic(CameraModel::Pinhole, 60.0, 0.0, &[g]);
        fields[0].valid.iter_mut().for_each(|v| *v = false);
        assert!(matches!(
            initialize(&fields, &SolveConfig::new(CameraModel::Pinhole)),
            Err(SolveError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn single_view_initializer_is_shared_with_multi_view() {
        let gs = [gravity_from_angles(0.3, 0.5).unwrap(), gravity_from_angles(-0.2, 1.2).unwrap()];
        let (_, fields) = synthetic(CameraModel::Pinhole, 60.0, 0.0, &gs);
        let cfg = SolveConfig::new(CameraModel::Pinhole);
        let both = initialize(&fields, &cfg).unwrap();
        let one = initialize(&fields[1..], &cfg).unwrap();
        assert_eq!(both.gravities[1], one.gravities[0]);
        assert_eq!(both.intrinsics, one.intrinsics);
    }

    #[test]
    fn pinhole_round_trip() {
        let g = gravity_from_angles(0.25, 1.1).unwrap();
        let (cam, fields) = synthetic(CameraModel::Pinhole, 72.0, 0.0, &[g]);
        let est = solve(&fields, &SolveConfig::new(CameraModel::Pinhole)).unwrap();
        let rec = est.intrinsics_for_view(0);
        assert!((rec.vfov().unwrap() - cam.vfov().unwrap()).abs() < 0.05);
        assert!(gravity_angular_error(&est.gravities[0], &g) < 0.02);
        assert!(est.converged);
    }

    #[test]
    fn ucm_shared_round_trip() {
        let gs: Vec<_> = [(0.1, 1.2), (-0.3, 1.0), (0.4, 1.4), (0.0, 0.8)]
            .iter()
            .map(|&(r, p)| gravity_from_angles(r, p).unwrap())
            .collect();
        let cam = CameraIntrinsics::from_hfov(CameraModel::Ucm, 640, 640, 160.0, 1.5).unwrap();
        let grid = GridSpec::for_image(640, 640);
        let fields: Vec<_> = gs.iter().map(|g| render_fields(&cam, g, &grid).unwrap()).collect();
        let est = solve(&fields, &SolveConfig::new(CameraModel::Ucm)).unwrap();
        let rec = est.intrinsics_for_view(0);
        assert!((rec.distortion() - 1.5).abs() < 1e-3, "xi {}", rec.distortion());
        assert!((rec.vfov().unwrap() - cam.vfov().unwrap()).abs() < 0.05);
        for (e, g) in est.gravities.iter().zip(&gs) {
            assert!(gravity_angular_error(e, g) < 0.02);
        }
    }

    #[test]
    fn independent_mode_reports_per_view_intrinsics() {
        let gs = [gravity_from_angles(0.3, 0.9).unwrap(), gravity_from_angles(-0.2, 1.2).unwrap()];
        let (_, fields) = synthetic(CameraModel::SimpleRadial, 60.0, 0.1, &gs);
        let est = solve(&fields, &SolveConfig::new(CameraModel::SimpleRadial).independent()).unwrap();
        match &est.intrinsics {
            IntrinsicsEstimate::PerView(v) => assert_eq!(v.len(), 2),
            other => panic!("expected per-view intrinsics, got {other:?}"),
        }
        assert_eq!(est.traces.len(), 2);
        assert_eq!(est.per_view_rms.len(), 2);
    }

    #[test]
    fn max_iters_hit_is_not_converged() {
        let g = gravity_from_angles(0.25, 1.1).unwrap();
        let (_, fields) = synthetic(CameraModel::Pinhole, 40.0, 0.0, &[g]);
        let mut cfg = SolveConfig::new(CameraModel::Pinhole);
        cfg.max_iters = 1;
        let est = solve(&fields, &cfg).unwrap();
        assert!(!est.converged);
        let report = diag_report(&est);
        assert!(!report.runs[0].cost_trace.is_empty());
    }

    #[test]
    fn cost_trace_is_monotone() {
        let g = gravity_from_angles(-0.4, 0.9).unwrap();
        let (_, fields) = synthetic(CameraModel::SimpleRadial, 90.0, -0.1, &[g]);
        let est = solve(&fields, &SolveConfig::new(CameraModel::SimpleRadial)).unwrap();
        let report = diag_report(&est);
        let trace = &report.runs[0].cost_trace;
        assert!(trace.len() >= 2);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(report.runs[0].accepted_steps + report.runs[0].rejected_steps + 1, report.runs[0].steps.len());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolveConfig::new(CameraModel::Pinhole);
        cfg.lambda_increase = 0.5;
        assert!(cfg.validate().is_err());
        let mut cfg = SolveConfig::new(CameraModel::Pinhole);
        cfg.step_tol = 0.0;
        assert!(cfg.validate().is_err());
        assert!(SolveConfig::new(CameraModel::Ucm).validate().is_ok());
    }

    #[test]
    fn mixed_sampling_is_rejected() {
        let g = gravity_from_angles(0.0, 1.0).unwrap();
        let (_, mut a) = synthetic(CameraModel::Pinhole, 60.0, 0.0, &[g]);
        let cam = CameraIntrinsics::from_vfov(CameraModel::Pinhole, 320, 320, 60.0, 0.0).unwrap();
        a.push(render_fields(&cam, &g, &GridSpec::for_image(320, 320)).unwrap());
        assert_eq!(
            solve(&a, &SolveConfig::new(CameraModel::Pinhole)).unwrap_err(),
            SolveError::MixedSampling
        );
    }
}
