use nalgebra::{DMatrix, DVector, Vector2};
use rayon::prelude::*;
use serde::Serialize;

use super::{SolveConfig, SolveError};
use crate::camera::CameraIntrinsics;
use crate::field::{linearize_view, PerspectiveField};
use crate::gravity::{tangent_update, GravityState};

/// Damping beyond which a failing linear solve is reported as an error.
const MAX_LAMBDA: f64 = 1e16;

/// One LM iteration. Entry 0 records the initial cost.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Cost of the current iterate after this iteration.
    pub cost: f64,
    /// Cost of the proposed step (equal to `cost` when accepted).
    pub trial_cost: f64,
    pub lambda: f64,
    pub step_norm: f64,
    pub accepted: bool,
}

pub(super) struct RunResult {
    pub intrinsics: CameraIntrinsics,
    pub gravities: Vec<GravityState>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub per_view_rms: Vec<f64>,
    pub trace: Vec<TraceEntry>,
}

#[derive(Clone, Copy)]
struct Robust(Option<f64>);

impl Robust {
    /// `(rho(e), IRLS weight)` for a confidence-scaled residual `e`.
    fn eval(self, e: f64) -> (f64, f64) {
        match self.0 {
            Some(d) if e.abs() > d => (2.0 * d * e.abs() - d * d, d / e.abs()),
            _ => (e * e, 1.0),
        }
    }
}

struct ViewCost {
    cost: f64,
    weight_sum: f64,
}

struct ViewSystem {
    cost: ViewCost,
    /// 4x4 Gauss-Newton block over `(log f, distortion, d1, d2)`.
    h: nalgebra::Matrix4<f64>,
    g: nalgebra::Vector4<f64>,
}

fn view_cost(
    field: &PerspectiveField,
    cam: &CameraIntrinsics,
    g: &GravityState,
    robust: Robust,
    view: usize,
) -> Result<ViewCost, SolveError> {
    let samples = linearize_view(field, cam, g, false)?;
    let mut cost = 0.0;
    let mut weight_sum = 0.0;
    for s in &samples {
        let sw = s.weight.sqrt();
        for k in 0..3 {
            cost += robust.eval(sw * s.residual[k]).0;
        }
        weight_sum += 3.0 * s.weight;
    }
    if !cost.is_finite() {
        return Err(SolveError::NonFinite { view });
    }
    Ok(ViewCost { cost, weight_sum })
}

fn view_system(
    field: &PerspectiveField,
    cam: &CameraIntrinsics,
    g: &GravityState,
    robust: Robust,
    view: usize,
) -> Result<ViewSystem, SolveError> {
    let samples = linearize_view(field, cam, g, true)?;
    let mut h = nalgebra::Matrix4::zeros();
    let mut grad = nalgebra::Vector4::zeros();
    let mut cost = 0.0;
    let mut weight_sum = 0.0;
    for s in &samples {
        let sw = s.weight.sqrt();
        for k in 0..3 {
            let e = sw * s.residual[k];
            let (rho, irls) = robust.eval(e);
            cost += rho;
            let w = s.weight * irls;
            let row = s.jacobian.row(k).transpose();
            h += row * row.transpose() * w;
            grad += row * (w * s.residual[k]);
        }
        weight_sum += 3.0 * s.weight;
    }
    if !cost.is_finite() || !h.iter().all(|v| v.is_finite()) {
        return Err(SolveError::NonFinite { view });
    }
    Ok(ViewSystem {
        cost: ViewCost { cost, weight_sum },
        h,
        g: grad,
    })
}

struct Problem<'a> {
    fields: &'a [PerspectiveField],
    robust: Robust,
    /// Number of intrinsic parameters: 1 (log f) or 2 (log f, distortion).
    k: usize,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.k + 2 * self.fields.len()
    }

    fn costs(&self, cam: &CameraIntrinsics, gravities: &[GravityState]) -> Result<Vec<ViewCost>, SolveError> {
        self.fields
            .par_iter()
            .zip(gravities.par_iter())
            .enumerate()
            .map(|(view, (f, g))| view_cost(f, cam, g, self.robust, view))
            .collect()
    }

    /// Normal equations `(H, g)` and the current per-view costs. Per-view
    /// blocks are reduced in view order.
    fn normal_equations(
        &self,
        cam: &CameraIntrinsics,
        gravities: &[GravityState],
    ) -> Result<(DMatrix<f64>, DVector<f64>, Vec<ViewCost>), SolveError> {
        let systems: Vec<ViewSystem> = self
            .fields
            .par_iter()
            .zip(gravities.par_iter())
            .enumerate()
            .map(|(view, (f, g))| view_system(f, cam, g, self.robust, view))
            .collect::<Result<_, _>>()?;
        let n = self.dim();
        let k = self.k;
        let mut h = DMatrix::zeros(n, n);
        let mut grad = DVector::zeros(n);
        let mut costs = Vec::with_capacity(systems.len());
        for (view, sys) in systems.into_iter().enumerate() {
            let o = k + 2 * view;
            // Intrinsic columns 0..k, gravity columns 2..4 of the view block.
            for a in 0..k {
                grad[a] += sys.g[a];
                for b in 0..k {
                    h[(a, b)] += sys.h[(a, b)];
                }
                for b in 0..2 {
                    h[(a, o + b)] = sys.h[(a, 2 + b)];
                    h[(o + b, a)] = sys.h[(2 + b, a)];
                }
            }
            for a in 0..2 {
                grad[o + a] = sys.g[2 + a];
                for b in 0..2 {
                    h[(o + a, o + b)] = sys.h[(2 + a, 2 + b)];
                }
            }
            costs.push(sys.cost);
        }
        Ok((h, grad, costs))
    }
}

/// Weighted (robust) cost of a full parameter set.
pub(super) fn total_cost(
    fields: &[PerspectiveField],
    cam: &CameraIntrinsics,
    gravities: &[GravityState],
    huber_delta: Option<f64>,
) -> Result<f64, SolveError> {
    let problem = Problem {
        fields,
        robust: Robust(huber_delta),
        k: 0,
    };
    Ok(total(&problem.costs(cam, gravities)?))
}

fn total(costs: &[ViewCost]) -> f64 {
    costs.iter().map(|c| c.cost).sum()
}

fn rms(costs: &[ViewCost]) -> Vec<f64> {
    costs
        .iter()
        .map(|c| if c.weight_sum > 0.0 { (c.cost / c.weight_sum).sqrt() } else { 0.0 })
        .collect()
}

fn damped_solve(h: &DMatrix<f64>, grad: &DVector<f64>, lambda: f64) -> Option<DVector<f64>> {
    let n = h.nrows();
    let max_diag = (0..n).map(|i| h[(i, i)]).fold(0.0f64, f64::max);
    let floor = (max_diag * 1e-12).max(f64::MIN_POSITIVE);
    let mut a = h.clone();
    for i in 0..n {
        a[(i, i)] += lambda * h[(i, i)].max(floor);
    }
    let rhs = -grad;
    if let Some(chol) = a.clone().cholesky() {
        let x = chol.solve(&rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    a.lu().solve(&rhs).filter(|x| x.iter().all(|v| v.is_finite()))
}

fn apply_step(
    cam: &CameraIntrinsics,
    gravities: &[GravityState],
    step: &DVector<f64>,
    k: usize,
) -> (CameraIntrinsics, Vec<GravityState>) {
    let f = (cam.focal().ln() + step[0]).exp();
    let d = if k == 2 {
        let (lo, hi) = cam.model().distortion_bounds();
        (cam.distortion() + step[1]).clamp(lo, hi)
    } else {
        cam.distortion()
    };
    let new_cam = cam.with_params(f, d);
    let new_g = gravities
        .iter()
        .enumerate()
        .map(|(i, g)| tangent_update(g, &Vector2::new(step[k + 2 * i], step[k + 2 * i + 1])))
        .collect();
    (new_cam, new_g)
}

pub(super) fn run(
    fields: &[PerspectiveField],
    cfg: &SolveConfig,
    init_cam: CameraIntrinsics,
    init_gravities: &[GravityState],
) -> Result<RunResult, SolveError> {
    let problem = Problem {
        fields,
        robust: Robust(cfg.huber_delta),
        k: if cfg.model.has_distortion() { 2 } else { 1 },
    };
    let mut cam = init_cam;
    let mut gravities = init_gravities.to_vec();
    let mut costs = problem.costs(&cam, &gravities)?;
    let mut cost = total(&costs);
    let mut lambda = cfg.lambda_init;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        cost,
        trial_cost: cost,
        lambda,
        step_norm: 0.0,
        accepted: true,
    }];
    let mut converged = cost == 0.0;
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let (h, grad, _) = problem.normal_equations(&cam, &gravities)?;
        let Some(step) = damped_solve(&h, &grad, lambda) else {
            log::debug!("normal equations failed at lambda {lambda:e}");
            if lambda > MAX_LAMBDA {
                return Err(SolveError::LinearSolve { lambda });
            }
            trace.push(TraceEntry {
                iteration: iterations,
                cost,
                trial_cost: f64::NAN,
                lambda,
                step_norm: f64::NAN,
                accepted: false,
            });
            lambda *= cfg.lambda_increase;
            continue;
        };
        let step_norm = step.norm();
        let (trial_cam, trial_g) = apply_step(&cam, &gravities, &step, problem.k);
        let trial_costs = problem.costs(&trial_cam, &trial_g)?;
        let trial_cost = total(&trial_costs);
        let accepted = trial_cost < cost;
        if accepted {
            let decrease = (cost - trial_cost) / cost;
            cam = trial_cam;
            gravities = trial_g;
            costs = trial_costs;
            cost = trial_cost;
            lambda *= cfg.lambda_decrease;
            converged = decrease < cfg.cost_tol || cost == 0.0;
        } else {
            lambda *= cfg.lambda_increase;
        }
        trace.push(TraceEntry {
            iteration: iterations,
            cost,
            trial_cost,
            lambda,
            step_norm,
            accepted,
        });
        if step_norm < cfg.step_tol {
            converged = true;
        }
    }

    Ok(RunResult {
        intrinsics: cam,
        gravities,
        cost,
        iterations,
        converged,
        per_view_rms: rms(&costs),
        trace,
    })
}
