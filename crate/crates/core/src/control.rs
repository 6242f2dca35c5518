//! End-time control by a static magnetic field.
//!
//! Minimizes `J(H) = ‖v(T) − v_T‖² + ‖d(T) − d_T‖²_{H¹} + γ‖H‖²` over
//! divergence-free fields in the ball `‖H‖_{L³} ≤ c_H`, with the state
//! given by the semi-discrete scheme. Gradients are central differences in
//! the control parameters; every cost evaluation is one full integration.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::{check_same_grid, discrete_norm, BoundaryMode, FieldError, Grid, NormKind, VectorField};
use crate::material::MaterialParams;
use crate::scalar::Real;
use crate::scheme::{integrate, FieldState, SchemeConfig, SchemeError, SimulationTrace};
use crate::tensor::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("invalid control problem: {0}")]
    Invalid(String),
    #[error("the initial control is not admissible: {0}")]
    Initial(SchemeError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// How a parameter vector maps to a field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Parametrization {
    /// Constant field, three parameters.
    Uniform,
    /// Constant part plus `cos`/`sin` modes with `|m_a| ≤ max_mode`, each
    /// with two amplitudes orthogonal to its wave vector. Periodic grids
    /// only.
    LowMode { max_mode: usize },
}

pub const MAX_CONTROL_DIM: usize = 64;

/// Basis fields of a parametrization on a grid.
#[derive(Clone, Debug)]
pub struct ControlBasis<T: Real> {
    fields: Vec<VectorField<T>>,
}

/// Two unit vectors spanning the plane orthogonal to `k`.
fn transverse_pair(k: [f64; 3]) -> [[f64; 3]; 2] {
    let n = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let kh = k.map(|x| x / n);
    let axis = (0..3).min_by(|&a, &b| kh[a].abs().total_cmp(&kh[b].abs())).unwrap_or(2);
    let mut r = [0.0; 3];
    r[axis] = 1.0;
    let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    let e1 = cross(kh, r);
    let m = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    let e1 = e1.map(|x| x / m);
    [e1, cross(kh, e1)]
}

impl<T: Real> ControlBasis<T> {
    pub fn new(grid: &Arc<Grid<T>>, param: Parametrization) -> Result<Self, ControlError> {
        let mut fields: Vec<VectorField<T>> = (0..3).map(|c| VectorField::constant(grid, Vec3::unit(c))).collect();
        if let Parametrization::LowMode { max_mode } = param {
            if grid.mode() != BoundaryMode::Periodic {
                return Err(ControlError::Invalid("low-mode controls need a periodic grid".into()));
            }
            let dims = grid.dims();
            for a in 0..dims {
                if 2 * max_mode >= grid.points()[a] {
                    return Err(ControlError::Invalid(format!(
                        "max_mode {max_mode} is not resolved on an axis with {} points",
                        grid.points()[a]
                    )));
                }
            }
            let mm = max_mode as i64;
            let ext: Vec<f64> = grid.extents().iter().map(|l| l.to_f64_lossy()).collect();
            let zr: Vec<i64> = if dims == 3 { (-mm..=mm).collect() } else { vec![0] };
            for a in 0..=mm {
                for b in -mm..=mm {
                    for &c in &zr {
                        if a == 0 && (b < 0 || (b == 0 && c <= 0)) {
                            continue;
                        }
                        let m = [a, b, c];
                        let k: [f64; 3] = std::array::from_fn(|i| {
                            if i < dims {
                                2.0 * std::f64::consts::PI * m[i] as f64 / ext[i]
                            } else {
                                0.0
                            }
                        });
                        for e in transverse_pair(k) {
                            let e = Vec3(e.map(T::lit));
                            for trig in [f64::cos, f64::sin] {
                                fields.push(VectorField::from_fn(grid, |x| {
                                    let phase: f64 = (0..3).map(|i| k[i] * x[i].to_f64_lossy()).sum();
                                    e * T::lit(trig(phase))
                                }));
                            }
                        }
                    }
                }
            }
        }
        if fields.len() > MAX_CONTROL_DIM {
            return Err(ControlError::Invalid(format!(
                "control dimension {} exceeds {MAX_CONTROL_DIM}",
                fields.len()
            )));
        }
        Ok(ControlBasis { fields })
    }

    pub fn dim(&self) -> usize {
        self.fields.len()
    }

    pub fn field(&self, theta: &[T]) -> VectorField<T> {
        let mut h = VectorField::zeros(self.fields[0].grid());
        for (c, f) in theta.iter().zip(&self.fields) {
            if *c != T::zero() {
                h.axpy(*c, f);
            }
        }
        h
    }
}

/// `J = ‖v − v_T‖² + ‖d − d_T‖²_{H¹} + γ‖H‖²`.
pub fn cost_j<T: Real>(
    final_state: &FieldState<T>,
    h: &VectorField<T>,
    v_target: &VectorField<T>,
    d_target: &VectorField<T>,
    gamma: T,
) -> Result<T, ControlError> {
    for f in [h, v_target, d_target, &final_state.d] {
        check_same_grid(final_state.v.grid(), f.grid())?;
    }
    let dv = &final_state.v - v_target;
    let dd = &final_state.d - d_target;
    let h1 = discrete_norm(&dd, NormKind::H1);
    Ok(dv.l2_norm_sq() + h1 * h1 + gamma * h.l2_norm_sq())
}

/// Radial projection onto `‖H‖_{L³} ≤ c_H`.
pub fn project_control<T: Real>(h: &VectorField<T>, c_h: T) -> VectorField<T> {
    let n = h.lp_norm(T::lit(3.0));
    if n <= c_h {
        h.clone()
    } else {
        h.scale(c_h / n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerOptions {
    pub max_iterations: usize,
    /// Budget of state integrations, gradient and line search included.
    pub max_state_solves: usize,
    pub grad_tol: f64,
    /// Relative decrease of `J` below which the run counts as stagnated.
    pub stagnation_tol: f64,
    /// Central-difference step; `None` means `1e−4 · c_H`.
    pub fd_step: Option<f64>,
    pub max_backtracks: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            max_iterations: 50,
            max_state_solves: 200,
            grad_tol: 1e-8,
            stagnation_tol: 1e-12,
            fd_step: None,
            max_backtracks: 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ControlProblem<T: Real> {
    pub params: MaterialParams<T>,
    /// Integration settings; its field `h` is replaced by the control.
    pub scheme: SchemeConfig<T>,
    pub initial: FieldState<T>,
    pub v_target: VectorField<T>,
    pub d_target: VectorField<T>,
    pub gamma: T,
    pub c_h: T,
    pub parametrization: Parametrization,
    /// Starting parameters (zero when `None`).
    pub theta0: Option<Vec<T>>,
    pub options: OptimizerOptions,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `J = 0`, nothing left to gain.
    ZeroCost,
    SmallGradient,
    Stagnation,
    LineSearchFailed,
    MaxIterations,
    Budget,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlLogRow {
    pub iteration: usize,
    pub j: f64,
    pub grad_norm: f64,
    pub step_length: f64,
    pub h_l2: f64,
    pub h_l3: f64,
}

impl ControlLogRow {
    pub const CSV_HEADER: &'static str = "iteration,J,grad_norm,step_length,H_l2,H_l3";

    pub fn csv_row(&self) -> String {
        format!("{},{:e},{:e},{:e},{:e},{:e}", self.iteration, self.j, self.grad_norm, self.step_length, self.h_l2, self.h_l3)
    }
}

#[derive(Clone, Debug)]
pub struct ControlResult<T: Real> {
    pub theta: Vec<T>,
    pub h_opt: VectorField<T>,
    pub j_history: Vec<f64>,
    pub log: Vec<ControlLogRow>,
    pub final_trace: SimulationTrace<T>,
    pub evaluations: usize,
    pub stop: StopReason,
}

/// Reduced cost `θ ↦ J(state(H(θ)), H(θ))` with evaluation bookkeeping.
pub struct ReducedCost<'a, T: Real> {
    problem: &'a ControlProblem<T>,
    basis: ControlBasis<T>,
    pub evaluations: usize,
}

impl<'a, T: Real> ReducedCost<'a, T> {
    pub fn new(problem: &'a ControlProblem<T>) -> Result<Self, ControlError> {
        let grid = problem.initial.grid();
        for f in [&problem.initial.d, &problem.v_target, &problem.d_target] {
            check_same_grid(grid, f.grid())?;
        }
        if !(problem.gamma > T::zero()) {
            return Err(ControlError::Invalid("gamma must be positive".into()));
        }
        if !(problem.c_h > T::zero()) {
            return Err(ControlError::Invalid("c_H must be positive".into()));
        }
        problem.scheme.validate().map_err(|e| ControlError::Invalid(e.to_string()))?;
        let basis = ControlBasis::new(grid, problem.parametrization)?;
        if let Some(t0) = &problem.theta0 {
            if t0.len() != basis.dim() {
                return Err(ControlError::Invalid(format!(
                    "initial control has {} parameters, the parametrization has {}",
                    t0.len(),
                    basis.dim()
                )));
            }
        }
        Ok(ReducedCost { problem, basis, evaluations: 0 })
    }

    pub fn basis(&self) -> &ControlBasis<T> {
        &self.basis
    }

    /// Scales `θ` so that the field lies in the `L³` ball.
    pub fn project(&self, theta: &[T]) -> Vec<T> {
        let n = self.basis.field(theta).lp_norm(T::lit(3.0));
        if n <= self.problem.c_h {
            theta.to_vec()
        } else {
            let s = self.problem.c_h / n;
            theta.iter().map(|&x| x * s).collect()
        }
    }

    /// `J` and the trace; a blown-up integration gives `J = ∞`.
    pub fn eval(&mut self, theta: &[T]) -> (f64, Option<SimulationTrace<T>>) {
        self.evaluations += 1;
        let h = self.basis.field(theta);
        let mut cfg = self.problem.scheme.clone();
        cfg.h = h.clone();
        match integrate(&self.problem.initial, &self.problem.params, &cfg) {
            Ok(trace) => {
                let j = cost_j(trace.final_state(), &h, &self.problem.v_target, &self.problem.d_target, self.problem.gamma)
                    .map(|j| j.to_f64_lossy())
                    .unwrap_or(f64::INFINITY);
                let j = if j.is_finite() { j } else { f64::INFINITY };
                (j, Some(trace))
            }
            Err(_) => (f64::INFINITY, None),
        }
    }

    /// Central-difference gradient and diagonal curvature at `θ`.
    pub fn fd_gradient(&mut self, theta: &[T], j0: f64, step: f64) -> (Vec<f64>, Vec<f64>) {
        let n = theta.len();
        let mut g = vec![0.0; n];
        let mut c = vec![0.0; n];
        for i in 0..n {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[i] = tp[i] + T::lit(step);
            tm[i] = tm[i] - T::lit(step);
            let (jp, _) = self.eval(&tp);
            let (jm, _) = self.eval(&tm);
            g[i] = (jp - jm) / (2.0 * step);
            c[i] = (jp - 2.0 * j0 + jm) / (step * step);
        }
        (g, c)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Projected quasi-Newton descent on the reduced cost.
///
/// Steps are accepted only on sufficient decrease, so the recorded `J`
/// history never increases. At a stationary point with negative curvature
/// along a parameter axis (the cost is even in `H` whenever the state
/// depends on `H` only through `H ⊗ H`, which makes `H = 0` stationary) the
/// search moves along that axis instead of stopping.
pub fn optimize<T: Real>(problem: &ControlProblem<T>) -> Result<ControlResult<T>, ControlError> {
    let opts = &problem.options;
    let mut rc = ReducedCost::new(problem)?;
    let n = rc.basis().dim();
    let c_h = problem.c_h.to_f64_lossy();
    let step = opts.fd_step.unwrap_or(1e-4 * c_h);
    if !(step > 0.0) {
        return Err(ControlError::Invalid("finite-difference step must be positive".into()));
    }
    let to_t = |x: &[f64]| x.iter().map(|&v| T::lit(v)).collect::<Vec<T>>();
    let to_f = |x: &[T]| x.iter().map(|v| v.to_f64_lossy()).collect::<Vec<f64>>();

    let mut theta = rc.project(&problem.theta0.clone().unwrap_or_else(|| vec![T::zero(); n]));
    let (mut j, trace) = rc.eval(&theta);
    let mut trace = match trace {
        Some(t) if j.is_finite() => t,
        _ => {
            let mut cfg = problem.scheme.clone();
            cfg.h = rc.basis().field(&theta);
            let err = integrate(&problem.initial, &problem.params, &cfg).err().unwrap_or(SchemeError::InvalidConfig(
                "cost is not finite at the initial control".into(),
            ));
            return Err(ControlError::Initial(err));
        }
    };
    let field_norms = |rc: &ReducedCost<T>, th: &[T]| {
        let h = rc.basis().field(th);
        (h.l2_norm().to_f64_lossy(), h.lp_norm(T::lit(3.0)).to_f64_lossy())
    };
    let (l2, l3) = field_norms(&rc, &theta);
    let mut log = vec![ControlLogRow { iteration: 0, j, grad_norm: f64::NAN, step_length: 0.0, h_l2: l2, h_l3: l3 }];
    let mut history = vec![j];

    let mut hinv: Option<Vec<Vec<f64>>> = None;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut stop = StopReason::MaxIterations;
    let budget_left = |rc: &ReducedCost<T>| opts.max_state_solves.saturating_sub(rc.evaluations);

    for iter in 1..=opts.max_iterations {
        if j == 0.0 {
            stop = StopReason::ZeroCost;
            break;
        }
        if budget_left(&rc) < 2 * n + 1 {
            stop = StopReason::Budget;
            break;
        }
        let (g, curv) = rc.fd_gradient(&theta, j, step);
        let gn = norm(&g);
        if let Some(l) = log.last_mut() {
            l.grad_norm = gn;
        }
        let th_f = to_f(&theta);

        // Curvature pair from the previous accepted step.
        if let (Some((s, g_old)), Some(h)) = (&prev, &mut hinv) {
            let y: Vec<f64> = g.iter().zip(g_old).map(|(a, b)| a - b).collect();
            let sy = dot(s, &y);
            if sy > 1e-12 * norm(s) * norm(&y) {
                let rho = 1.0 / sy;
                let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], &y)).collect();
                let yhy = dot(&y, &hy);
                for a in 0..n {
                    for b in 0..n {
                        h[a][b] += -rho * (hy[a] * s[b] + s[a] * hy[b]) + (rho * rho * yhy + rho) * s[a] * s[b];
                    }
                }
            }
        }

        let escape = gn <= opts.grad_tol;
        let (dir, mut alpha) = if escape {
            let (i, cmin) = curv.iter().enumerate().fold((0, f64::INFINITY), |m, (i, &c)| if c < m.1 { (i, c) } else { m });
            // Curvature must stand out of the rounding noise of J.
            if !(cmin * step * step < -1e-10 * j.abs()) {
                stop = StopReason::SmallGradient;
                break;
            }
            hinv = None;
            let e = unit(n, i);
            let e_l3 = rc.basis().field(&to_t(&e)).lp_norm(T::lit(3.0)).to_f64_lossy();
            (e, 0.5 * c_h / e_l3)
        } else {
            let h = hinv.get_or_insert_with(|| {
                let all_pos = curv.iter().all(|&c| c > 0.0);
                let s0 = 0.1 * c_h / gn;
                (0..n)
                    .map(|a| (0..n).map(|b| if a == b { if all_pos { 1.0 / curv[a] } else { s0 } } else { 0.0 }).collect())
                    .collect()
            });
            let mut d: Vec<f64> = (0..n).map(|a| -dot(&h[a], &g)).collect();
            if dot(&d, &g) >= 0.0 {
                d = g.iter().map(|x| -x * 0.1 * c_h / gn).collect();
                hinv = None;
            }
            (d, 1.0)
        };

        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            if budget_left(&rc) == 0 {
                break;
            }
            let trial_f: Vec<f64> = th_f.iter().zip(&dir).map(|(t, d)| t + alpha * d).collect();
            let trial = rc.project(&to_t(&trial_f));
            let s: Vec<f64> = to_f(&trial).iter().zip(&th_f).map(|(a, b)| a - b).collect();
            let (jt, tr) = rc.eval(&trial);
            let sufficient = if escape { jt < j } else { jt <= j + 1e-4 * dot(&g, &s) && jt <= j };
            if jt.is_finite() && sufficient {
                accepted = Some((trial, s, jt, tr));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, s, jt, tr)) => {
                let rel = (j - jt) / j.abs().max(f64::MIN_POSITIVE);
                theta = trial;
                j = jt;
                if let Some(tr) = tr {
                    trace = tr;
                }
                let (l2, l3) = field_norms(&rc, &theta);
                log.push(ControlLogRow { iteration: iter, j, grad_norm: f64::NAN, step_length: norm(&s), h_l2: l2, h_l3: l3 });
                history.push(j);
                prev = if escape { None } else { Some((s, g)) };
                if !escape && rel <= opts.stagnation_tol {
                    stop = StopReason::Stagnation;
                    break;
                }
            }
            None => {
                if budget_left(&rc) == 0 {
                    stop = StopReason::Budget;
                    break;
                }
                if hinv.is_some() {
                    // Retry once from a scaled gradient step.
                    hinv = None;
                    prev = None;
                    continue;
                }
                stop = StopReason::LineSearchFailed;
                break;
            }
        }
    }

    Ok(ControlResult {
        h_opt: rc.basis().field(&theta),
        theta,
        j_history: history,
        log,
        final_trace: trace,
        evaluations: rc.evaluations,
        stop,
    })
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}
