//! Semi-discrete Ericksen–Leslie system, explicit time stepping and the
//! structural diagnostics (energy balance, director norm, coercivity).
//!
//! The right-hand side is
//!
//! ```text
//! ḋ = −R[M((v·∇)d − W d + λ D d + q_n)],        M = |d|²I − d⊗d
//! v̇ = P[g − B(v,v) + ∇dᵀ M q_n + div T^L]
//! ```
//!
//! with `D`, `W` the symmetric and skew parts of `∇v`, `B` the skew
//! (split) convection and `q_n = R q + γ d`. On periodic grids every
//! pairing in the energy balance cancels exactly at the semi-discrete
//! level, so the residual measures time-integration error only.
//!
//! The integrators carry the accumulated dissipation and forcing work as
//! extra ODE components, so the balance residual converges at the order of
//! the integrator rather than at the order of an after-the-fact quadrature.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{breakdown_from_grad, project_q, q_explicit_from_grad, q_tensor_from_grad, EnergyBreakdown, QForm};
use crate::fields::{
    check_same_grid, director_project, div_matrix, extension_operator, gradient_kernel_part, grad, leray_project,
    poincare_constant, BoundaryMode, DirectorProjection, Field, FieldError, Grid, MatrixField, SpectralCutoff,
    VectorField,
};
use crate::material::MaterialParams;
use crate::scalar::{pairwise_sum_by, Real};
use crate::tensor::{Mat3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("blow-up at step {step} (t = {t:e}): {quantity} = {value:e}")]
    BlowUp { step: usize, t: f64, quantity: &'static str, value: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Debug)]
pub struct FieldState<T: Real> {
    pub v: VectorField<T>,
    pub d: VectorField<T>,
    pub t: T,
}

impl<T: Real> FieldState<T> {
    pub fn new(v: VectorField<T>, d: VectorField<T>, t: T) -> Result<Self, SchemeError> {
        check_same_grid(v.grid(), d.grid())?;
        Ok(FieldState { v, d, t })
    }

    pub fn grid(&self) -> &Arc<Grid<T>> {
        self.d.grid()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

pub type ForcingFn<T> = Arc<dyn Fn(T, [T; 3]) -> Vec3<T> + Send + Sync>;

/// Body force `g`.
#[derive(Clone, Default)]
pub enum Forcing<T: Real> {
    #[default]
    Zero,
    Static(VectorField<T>),
    /// Closed form `g(t, x)`, sampled at the nodes on every stage.
    TimeDependent(ForcingFn<T>),
}

impl<T: Real> std::fmt::Debug for Forcing<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Forcing::Zero => f.write_str("Zero"),
            Forcing::Static(_) => f.write_str("Static(..)"),
            Forcing::TimeDependent(_) => f.write_str("TimeDependent(..)"),
        }
    }
}

impl<T: Real> Forcing<T> {
    pub fn sample(&self, grid: &Arc<Grid<T>>, t: T) -> Option<VectorField<T>> {
        match self {
            Forcing::Zero => None,
            Forcing::Static(g) => Some(g.clone()),
            Forcing::TimeDependent(f) => Some(VectorField::from_fn(grid, |x| f(t, x))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SchemeConfig<T: Real> {
    pub dt: T,
    pub t_end: T,
    pub integrator: Integrator,
    pub forcing: Forcing<T>,
    /// Static magnetic field.
    pub h: VectorField<T>,
    pub director_projection: DirectorProjection,
    pub velocity_cutoff: Option<SpectralCutoff>,
    pub q_form: QForm,
    /// Keep every `record_every`-th state (the final state is always kept).
    pub record_every: usize,
    /// Nodal `|v|` or `|∇d|` beyond this aborts the run.
    pub blowup_threshold: T,
}

impl<T: Real> SchemeConfig<T> {
    /// RK4, no forcing, zero field, collocation director space.
    pub fn new(grid: &Arc<Grid<T>>, dt: T, t_end: T) -> Self {
        SchemeConfig {
            dt,
            t_end,
            integrator: Integrator::Rk4,
            forcing: Forcing::Zero,
            h: VectorField::zeros(grid),
            director_projection: DirectorProjection::Collocation,
            velocity_cutoff: None,
            q_form: QForm::Tensor,
            record_every: 1,
            blowup_threshold: T::lit(1e8),
        }
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        if !(self.dt.is_finite() && self.dt > T::zero()) {
            return Err(SchemeError::InvalidConfig("dt must be positive".into()));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(SchemeError::InvalidConfig("t_end must be at least dt".into()));
        }
        if self.record_every == 0 {
            return Err(SchemeError::InvalidConfig("record_every must be positive".into()));
        }
        if !self.h.all_finite() {
            return Err(SchemeError::InvalidConfig("magnetic field has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Conservative explicit step size `safety · h² / (4 dims (Σkᵢ + μ₄))`.
pub fn suggested_dt<T: Real>(grid: &Grid<T>, params: &MaterialParams<T>, safety: T) -> T {
    let h = grid.min_spacing();
    let m = params.k.iter().fold(params.mu[3], |s, &k| s + k.abs());
    safety * h * h / (T::lit(4.0) * T::lit(grid.dims() as f64) * m)
}

/// Nodal Leslie stress `T^L` from `d`, `∇v` and `q`.
#[inline]
pub fn leslie_stress_node<T: Real>(p: &MaterialParams<T>, d: &Vec3<T>, gv: &Mat3<T>, q: &Vec3<T>) -> Mat3<T> {
    let dsym = gv.sym();
    let dd = dsym.mul_vec(d);
    let ddd = d.dot(&dd);
    let d2 = d.norm_sq();
    let mq = *q * d2 - *d * d.dot(q);
    d.outer(d) * (p.visc_dd() * ddd) + dsym * p.visc_iso() + d.outer(&dd).sym() * p.visc_d()
        - d.outer(&mq).sym() * p.lambda
        - d.outer(q).skw() * d2
}

pub fn leslie_stress<T: Real>(
    v: &VectorField<T>,
    d: &VectorField<T>,
    q: &VectorField<T>,
    p: &MaterialParams<T>,
) -> Result<MatrixField<T>, SchemeError> {
    check_same_grid(v.grid(), d.grid())?;
    check_same_grid(v.grid(), q.grid())?;
    let gv = grad(v);
    let data = (0..d.data().len())
        .map(|i| leslie_stress_node(p, &d.data()[i], &gv.data()[i], &q.data()[i]))
        .collect();
    Ok(Field::from_vec(d.grid(), data))
}

/// Everything one right-hand-side evaluation produces.
#[derive(Clone, Debug)]
pub struct RhsTerms<T: Real> {
    pub dv_dt: VectorField<T>,
    pub dd_dt: VectorField<T>,
    pub q_n: VectorField<T>,
    /// Spatial integrals of `(μ₁+λ²)(d·Dd)²`, `μ₄|D|²`, `(μ₅+μ₆−λ²)|Dd|²`, `|d×q_n|²`.
    pub dissipation: [T; 4],
    /// `(g, v)`.
    pub work: T,
    pub max_v: T,
    pub max_grad_d: T,
    pub grad_d: MatrixField<T>,
}

pub(crate) fn rhs_terms<T: Real>(
    v: &VectorField<T>,
    d: &VectorField<T>,
    t: T,
    p: &MaterialParams<T>,
    cfg: &SchemeConfig<T>,
) -> Result<RhsTerms<T>, SchemeError> {
    let grid = d.grid();
    let a = grad(d);
    let gv = grad(v);
    let q = match cfg.q_form {
        QForm::Tensor => q_tensor_from_grad(p, d, &a, &cfg.h),
        QForm::Explicit => q_explicit_from_grad(p, d, &a, &cfg.h),
    };
    let mut qn = project_q(p, d, &q, &cfg.director_projection);
    // Boundary nodes are prescribed, so q only acts on interior unknowns.
    if grid.mode() == BoundaryMode::Dirichlet {
        for (i, x) in qn.data_mut().iter_mut().enumerate() {
            if grid.is_boundary(i) {
                *x = Vec3::zero();
            }
        }
    }

    let n = grid.len();
    let mut z = Vec::with_capacity(n);
    let mut stress = Vec::with_capacity(n);
    let mut ericksen = Vec::with_capacity(n);
    let mut vv = Vec::with_capacity(n);
    let mut diss = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
    let mut max_v = T::zero();
    let mut max_g = T::zero();
    for i in 0..n {
        let (dv, vi, ai, gi, qi) = (&d.data()[i], &v.data()[i], &a.data()[i], &gv.data()[i], &qn.data()[i]);
        max_v = max_v.max(vi.norm());
        max_g = max_g.max(ai.norm_sq().sqrt());
        let d2 = dv.norm_sq();
        let m = |x: Vec3<T>| x * d2 - *dv * dv.dot(&x);
        let sym = gi.sym();
        let skw = gi.skw();
        let dd = sym.mul_vec(dv);
        let inner = ai.mul_vec(vi) - skw.mul_vec(dv) + dd * p.lambda + *qi;
        z.push(m(inner));
        ericksen.push(ai.tr_mul_vec(&m(*qi)));
        stress.push(leslie_stress_node(p, dv, gi, qi));
        vv.push(vi.outer(vi));
        let ddd = dv.dot(&dd);
        diss[0].push(p.visc_dd() * ddd * ddd);
        diss[1].push(p.visc_iso() * sym.norm_sq());
        diss[2].push(p.visc_d() * dd.norm_sq());
        diss[3].push(dv.cross(qi).norm_sq());
    }
    let w = grid.weights();
    let dissipation: [T; 4] = std::array::from_fn(|k| pairwise_sum_by(n, |i| w[i] * diss[k][i]));

    let mut dd_dt = director_project(&Field::from_vec(grid, z), cfg.director_projection.cutoff()).scale(-T::one());
    if grid.mode() == BoundaryMode::Dirichlet {
        for (i, x) in dd_dt.data_mut().iter_mut().enumerate() {
            if grid.is_boundary(i) {
                *x = Vec3::zero();
            }
        }
    }

    // Skew convection ½[(v·∇)v + div(v⊗v)].
    let half = T::lit(0.5);
    let conv_flux = div_matrix(&Field::from_vec(grid, vv));
    let div_stress = div_matrix(&Field::from_vec(grid, stress));
    let g = cfg.forcing.sample(grid, t);
    let mut force = Vec::with_capacity(n);
    for i in 0..n {
        let b = (gv.data()[i].mul_vec(&v.data()[i]) + conv_flux.data()[i]) * half;
        let mut f = ericksen[i] + div_stress.data()[i] - b;
        if let Some(g) = &g {
            f += g.data()[i];
        }
        force.push(f);
    }
    let dv_dt = leray_project(&Field::from_vec(grid, force), cfg.velocity_cutoff.as_ref())?;
    let work = match &g {
        Some(g) => g.inner(v),
        None => T::zero(),
    };
    Ok(RhsTerms { dv_dt, dd_dt, q_n: qn, dissipation, work, max_v, max_grad_d: max_g, grad_d: a })
}

/// `(dv/dt, dd/dt)` at the given state.
pub fn assemble_rhs<T: Real>(
    state: &FieldState<T>,
    p: &MaterialParams<T>,
    cfg: &SchemeConfig<T>,
) -> Result<(VectorField<T>, VectorField<T>), SchemeError> {
    check_same_grid(state.v.grid(), state.d.grid())?;
    check_same_grid(state.v.grid(), cfg.h.grid())?;
    let r = rhs_terms(&state.v, &state.d, state.t, p, cfg)?;
    Ok((r.dv_dt, r.dd_dt))
}

/// Initial data of the scheme: `v₀ = P v_raw`, `d₀ = S d₁ + R(d_raw − S d₁)`.
/// On Dirichlet grids `d₁` is the boundary trace of `d_raw`.
pub fn prepare_initial_state<T: Real>(
    v_raw: &VectorField<T>,
    d_raw: &VectorField<T>,
    p: &MaterialParams<T>,
    cfg: &SchemeConfig<T>,
) -> Result<FieldState<T>, SchemeError> {
    check_same_grid(v_raw.grid(), d_raw.grid())?;
    let v0 = leray_project(v_raw, cfg.velocity_cutoff.as_ref())?;
    let d0 = match d_raw.grid().mode() {
        BoundaryMode::Periodic => director_project(d_raw, cfg.director_projection.cutoff()),
        BoundaryMode::Dirichlet => {
            let (s, _) = extension_operator(d_raw, p.k[0], p.k[1])?;
            let r = director_project(&(d_raw - &s), cfg.director_projection.cutoff());
            &s + &r
        }
    };
    Ok(FieldState { v: v0, d: d0, t: T::zero() })
}

/// Per-sample diagnostics (all `f64` for output).
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub t: f64,
    pub kinetic: f64,
    pub energy: EnergyBreakdown,
    pub dissipation_rate: [f64; 4],
    pub dissipation_integral: [f64; 4],
    pub work_rate: f64,
    pub work_integral: f64,
    /// Balance residual with the integrals carried by the integrator.
    pub energy_residual: f64,
    /// `max_x ||d(x,t)| − |d(x,0)||` at this sample.
    pub max_norm_deviation: f64,
    pub max_v: f64,
    pub max_grad_d: f64,
}

impl StepDiagnostics {
    pub const CSV_HEADER: &'static str =
        "t,kinetic,elastic,magnetic,diss_mu1,diss_mu4,diss_mu56,diss_dxq,energy_residual,max_norm_deviation";

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t,
            self.kinetic,
            self.energy.elastic(),
            self.energy.magnetic(),
            self.dissipation_rate[0],
            self.dissipation_rate[1],
            self.dissipation_rate[2],
            self.dissipation_rate[3],
            self.energy_residual,
            self.max_norm_deviation
        )
    }
}

#[derive(Clone, Debug)]
pub struct SimulationTrace<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<FieldState<T>>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Number of integrator steps taken.
    pub steps: usize,
    /// Max of `||d| − |d₀||` over every node and every step, recorded or not.
    pub max_norm_deviation: f64,
    pub dt: T,
}

impl<T: Real> SimulationTrace<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn final_state(&self) -> &FieldState<T> {
        self.states.last().expect("trace is never empty")
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.diagnostics.iter().fold(0.0, |m, d| m.max(d.energy_residual.abs()))
    }
}

#[derive(Clone)]
struct Aug<T: Real> {
    v: VectorField<T>,
    d: VectorField<T>,
    diss: [T; 4],
    work: T,
}

struct Rate<T: Real> {
    dv: VectorField<T>,
    dd: VectorField<T>,
    diss: [T; 4],
    work: T,
}

impl<T: Real> Aug<T> {
    fn plus(&self, h: T, r: &Rate<T>) -> Self {
        let mut out = self.clone();
        out.v.axpy(h, &r.dv);
        out.d.axpy(h, &r.dd);
        for k in 0..4 {
            out.diss[k] = out.diss[k] + h * r.diss[k];
        }
        out.work = out.work + h * r.work;
        out
    }
}

fn rate_of<T: Real>(r: RhsTerms<T>) -> Rate<T> {
    Rate { dv: r.dv_dt, dd: r.dd_dt, diss: r.dissipation, work: r.work }
}

fn check_blowup<T: Real>(r: &RhsTerms<T>, threshold: T, step: usize, t: T) -> Result<(), SchemeError> {
    for (name, x) in [("max |v|", r.max_v), ("max |grad d|", r.max_grad_d)] {
        if !x.is_finite() || x > threshold {
            return Err(SchemeError::BlowUp { step, t: t.to_f64_lossy(), quantity: name, value: x.to_f64_lossy() });
        }
    }
    Ok(())
}

fn norm_deviation<T: Real>(d: &VectorField<T>, n0: &[T]) -> f64 {
    d.data()
        .iter()
        .zip(n0)
        .fold(T::zero(), |m, (x, &r)| m.max((x.norm() - r).abs()))
        .to_f64_lossy()
}

/// Advances `state0` to `t_end` with fixed steps, recording diagnostics.
pub fn integrate<T: Real>(
    state0: &FieldState<T>,
    p: &MaterialParams<T>,
    cfg: &SchemeConfig<T>,
) -> Result<SimulationTrace<T>, SchemeError> {
    cfg.validate()?;
    check_same_grid(state0.v.grid(), state0.d.grid())?;
    check_same_grid(state0.v.grid(), cfg.h.grid())?;
    if let Forcing::Static(g) = &cfg.forcing {
        check_same_grid(g.grid(), state0.d.grid())?;
    }
    let t0 = state0.t;
    let n0: Vec<T> = state0.d.data().iter().map(|x| x.norm()).collect();
    let ratio = ((cfg.t_end - t0) / cfg.dt).to_f64_lossy();
    let nsteps = ((ratio - 1e-9).ceil().max(1.0)) as usize;

    let half = T::lit(0.5);
    let mut y = Aug { v: state0.v.clone(), d: state0.d.clone(), diss: [T::zero(); 4], work: T::zero() };
    let e0 = {
        let r = rhs_terms(&y.v, &y.d, t0, p, cfg)?;
        let b = breakdown_from_grad(p, &y.d, &r.grad_d, &cfg.h);
        half.to_f64_lossy() * y.v.l2_norm_sq().to_f64_lossy() + b.total
    };

    let mut trace = SimulationTrace {
        times: Vec::new(),
        states: Vec::new(),
        diagnostics: Vec::new(),
        steps: 0,
        max_norm_deviation: 0.0,
        dt: cfg.dt,
    };
    let record = |trace: &mut SimulationTrace<T>, y: &Aug<T>, t: T, r: &RhsTerms<T>| {
        let b = breakdown_from_grad(p, &y.d, &r.grad_d, &cfg.h);
        let kinetic = half.to_f64_lossy() * y.v.l2_norm_sq().to_f64_lossy();
        let di: [f64; 4] = y.diss.map(|x| x.to_f64_lossy());
        let wi = y.work.to_f64_lossy();
        let residual = (kinetic + b.total - e0) + (di.iter().sum::<f64>() - wi);
        let dev = norm_deviation(&y.d, &n0);
        trace.max_norm_deviation = trace.max_norm_deviation.max(dev);
        trace.times.push(t);
        trace.states.push(FieldState { v: y.v.clone(), d: y.d.clone(), t });
        trace.diagnostics.push(StepDiagnostics {
            t: t.to_f64_lossy(),
            kinetic,
            energy: b,
            dissipation_rate: r.dissipation.map(|x| x.to_f64_lossy()),
            dissipation_integral: di,
            work_rate: r.work.to_f64_lossy(),
            work_integral: wi,
            energy_residual: residual,
            max_norm_deviation: dev,
            max_v: r.max_v.to_f64_lossy(),
            max_grad_d: r.max_grad_d.to_f64_lossy(),
        });
    };

    let mut t = t0;
    for step in 0..nsteps {
        let k1r = rhs_terms(&y.v, &y.d, t, p, cfg)?;
        check_blowup(&k1r, cfg.blowup_threshold, step, t)?;
        if step % cfg.record_every == 0 {
            record(&mut trace, &y, t, &k1r);
        } else {
            trace.max_norm_deviation = trace.max_norm_deviation.max(norm_deviation(&y.d, &n0));
        }
        let t_next = if step + 1 == nsteps { cfg.t_end } else { t0 + T::from_usize_lossy(step + 1) * cfg.dt };
        let h = t_next - t;
        let k1 = rate_of(k1r);
        y = match cfg.integrator {
            Integrator::Euler => y.plus(h, &k1),
            Integrator::Rk4 => {
                let y1 = y.plus(h * half, &k1);
                let k2 = rate_of(rhs_terms(&y1.v, &y1.d, t + h * half, p, cfg)?);
                let y2 = y.plus(h * half, &k2);
                let k3 = rate_of(rhs_terms(&y2.v, &y2.d, t + h * half, p, cfg)?);
                let y3 = y.plus(h, &k3);
                let k4 = rate_of(rhs_terms(&y3.v, &y3.d, t_next, p, cfg)?);
                let six = T::lit(6.0);
                let two = T::lit(2.0);
                y.plus(h / six, &k1).plus(h * two / six, &k2).plus(h * two / six, &k3).plus(h / six, &k4)
            }
        };
        t = t_next;
        trace.steps = step + 1;
        if !(y.v.all_finite() && y.d.all_finite()) {
            return Err(SchemeError::BlowUp { step: step + 1, t: t.to_f64_lossy(), quantity: "state", value: f64::NAN });
        }
    }
    let rf = rhs_terms(&y.v, &y.d, t, p, cfg)?;
    check_blowup(&rf, cfg.blowup_threshold, nsteps, t)?;
    record(&mut trace, &y, t, &rf);
    Ok(trace)
}

/// How the time integrals of the energy balance are evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ResidualQuadrature {
    /// Integrals carried through the integrator (order of the integrator).
    #[default]
    Integrator,
    /// Trapezoid rule on the recorded rates.
    Trapezoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReportRow {
    pub t: f64,
    pub free_energy: f64,
    pub kinetic: f64,
    pub residual: f64,
    /// `F^OF(d) − k‖∇(d − S)‖²` (must be ≥ 0).
    pub coercivity_gradient_slack: f64,
    /// `F^OF(d) − (η‖d‖²_{H¹} − c_b)` (must be ≥ 0).
    pub coercivity_h1_slack: f64,
    pub v_l2: f64,
    pub d_h1: f64,
}

impl EnergyReportRow {
    pub const CSV_HEADER: &'static str =
        "t,free_energy,kinetic,energy_residual,coercivity_gradient_slack,coercivity_h1_slack,v_l2,d_h1";

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t,
            self.free_energy,
            self.kinetic,
            self.residual,
            self.coercivity_gradient_slack,
            self.coercivity_h1_slack,
            self.v_l2,
            self.d_h1
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub rows: Vec<EnergyReportRow>,
    pub max_abs_residual: f64,
    /// Constant of the gradient bound (the coercivity constant `k`).
    pub eta_gradient: f64,
    /// `η` of the full `H¹` bound.
    pub eta_h1: f64,
    pub poincare_constant: f64,
    pub coercivity_violations: usize,
    pub sup_v_l2: f64,
    pub sup_d_h1: f64,
}

/// Energy balance residual and coercivity bounds along a trace.
///
/// Coercivity is checked in two forms, with `S` the part of `d` fixed by
/// the boundary (the gradient kernel on periodic grids, the Λ-harmonic
/// extension of the boundary trace on Dirichlet grids):
///
/// * `F(d) ≥ k ‖∇(d − S)‖²` with `k = k_coercive`;
/// * `F(d) ≥ η ‖d‖²_{H¹} − c_b` with `η = k/(1 + C_P)`, `c_b = η ‖S‖²_{H¹}`
///   on periodic grids and `η = k/(2(1 + C_P))`, `c_b = 2η ‖S‖²_{H¹}` on
///   Dirichlet grids.
pub fn energy_report<T: Real>(
    trace: &SimulationTrace<T>,
    p: &MaterialParams<T>,
    cfg: &SchemeConfig<T>,
    quadrature: ResidualQuadrature,
) -> Result<EnergyReport, SchemeError> {
    if trace.is_empty() {
        return Err(SchemeError::InvalidConfig("empty trace".into()));
    }
    let grid = trace.states[0].grid().clone();
    let _ = cfg;
    let k = p.k_coercive.to_f64_lossy();
    let cp = poincare_constant(&grid).to_f64_lossy();
    let (eta_h1, c_factor) = match grid.mode() {
        BoundaryMode::Periodic => (k / (1.0 + cp), 1.0),
        BoundaryMode::Dirichlet => (k / (2.0 * (1.0 + cp)), 2.0),
    };
    let boundary_part = match grid.mode() {
        BoundaryMode::Dirichlet => Some(extension_operator(&trace.states[0].d, p.k[0], p.k[1])?.0),
        BoundaryMode::Periodic => None,
    };

    let e0 = trace.diagnostics[0].kinetic + trace.diagnostics[0].energy.total;
    let mut trap_diss = 0.0;
    let mut trap_work = 0.0;
    let mut rows = Vec::with_capacity(trace.len());
    let mut violations = 0;
    for (i, (st, dg)) in trace.states.iter().zip(&trace.diagnostics).enumerate() {
        if i > 0 {
            let prev = &trace.diagnostics[i - 1];
            let h = dg.t - prev.t;
            trap_diss += 0.5 * h * (prev.dissipation_rate.iter().sum::<f64>() + dg.dissipation_rate.iter().sum::<f64>());
            trap_work += 0.5 * h * (prev.work_rate + dg.work_rate);
        }
        let residual = match quadrature {
            ResidualQuadrature::Integrator => dg.energy_residual,
            ResidualQuadrature::Trapezoid => dg.kinetic + dg.energy.total - e0 + trap_diss - trap_work,
        };
        let s = match &boundary_part {
            Some(s) => s.clone(),
            None => gradient_kernel_part(&st.d)?,
        };
        let phi = &st.d - &s;
        let grad_phi = grad(&phi).l2_norm_sq().to_f64_lossy();
        let s_h1 = s.l2_norm_sq().to_f64_lossy() + grad(&s).l2_norm_sq().to_f64_lossy();
        let d_h1_sq = st.d.l2_norm_sq().to_f64_lossy() + grad(&st.d).l2_norm_sq().to_f64_lossy();
        let f_el = dg.energy.elastic();
        let gslack = f_el - k * grad_phi;
        let hslack = f_el - (eta_h1 * d_h1_sq - c_factor * eta_h1 * s_h1);
        let tol = 1e-12 * (1.0 + f_el.abs());
        if gslack < -tol || hslack < -tol {
            violations += 1;
        }
        rows.push(EnergyReportRow {
            t: dg.t,
            free_energy: dg.energy.total,
            kinetic: dg.kinetic,
            residual,
            coercivity_gradient_slack: gslack,
            coercivity_h1_slack: hslack,
            v_l2: (2.0 * dg.kinetic).sqrt(),
            d_h1: d_h1_sq.sqrt(),
        });
    }
    Ok(EnergyReport {
        max_abs_residual: rows.iter().fold(0.0, |m, r| m.max(r.residual.abs())),
        sup_v_l2: rows.iter().fold(0.0, |m, r| m.max(r.v_l2)),
        sup_d_h1: rows.iter().fold(0.0, |m, r| m.max(r.d_h1)),
        rows,
        eta_gradient: k,
        eta_h1,
        poincare_constant: cp,
        coercivity_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{random_smooth_field, Grid};
    use crate::material::{build_params, MaterialInputs};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params() -> MaterialParams<f64> {
        build_params(MaterialInputs {
            frank: [2.0, 1.0, 3.0],
            mu: [1.0, 1.0, 0.5, 1.0, 2.0, 1.0],
            chi_par: -0.1,
            chi_perp: -0.3,
        })
        .unwrap()
    }

    fn rmat(rng: &mut ChaCha8Rng) -> Mat3<f64> {
        Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0))
    }

    fn rvec(rng: &mut ChaCha8Rng) -> Vec3<f64> {
        Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn leslie_stress_examples() {
        let p = params();
        let d = Vec3::unit(2);
        assert_eq!(leslie_stress_node(&p, &d, &Mat3::zero(), &Vec3::zero()), Mat3::zero());
        let gv = Mat3([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]]);
        let t = leslie_stress_node(&p, &d, &gv, &Vec3::zero());
        assert!((t - gv * p.visc_iso()).max_abs() < 1e-15);
    }

    #[test]
    fn leslie_stress_matches_original_form_for_unit_director() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let [mu1, _, _, mu4, mu5, mu6] = p.mu;
        let lam = p.lambda;
        for _ in 0..100 {
            let d = {
                let x = rvec(&mut rng);
                x * (1.0 / x.norm())
            };
            let gv = rmat(&mut rng);
            let q = rvec(&mut rng);
            let dsym = gv.sym();
            let dd = dsym.mul_vec(&d);
            let proj = |x: Vec3<f64>| x - d * d.dot(&x);
            let e = -proj(dd * lam + q);
            let t1 = d.outer(&d) * (mu1 * d.dot(&dd))
                + dsym * mu4
                + d.outer(&dd).sym() * (mu5 + mu6)
                + d.outer(&e).sym() * lam
                + d.outer(&dd).skw() * lam
                + d.outer(&e).skw();
            let t = leslie_stress_node(&p, &d, &gv, &q);
            assert!((t - t1).max_abs() < 1e-10);
        }
    }

    #[test]
    fn dissipation_identity() {
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let d = rvec(&mut rng);
            let gv = rmat(&mut rng);
            let q = rvec(&mut rng);
            let t = leslie_stress_node(&p, &d, &gv, &q);
            let dsym = gv.sym();
            let dd = dsym.mul_vec(&d);
            let mq = q * d.norm_sq() - d * d.dot(&q);
            let lhs = t.frob(&gv);
            let rhs = p.visc_dd() * d.dot(&dd).powi(2) + p.visc_iso() * dsym.norm_sq() + p.visc_d() * dd.norm_sq()
                - p.lambda * mq.dot(&dd)
                + d.norm_sq() * q.dot(&gv.skw().mul_vec(&d));
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    fn setup() -> (std::sync::Arc<Grid<f64>>, MaterialParams<f64>, FieldState<f64>, SchemeConfig<f64>) {
        let g = Grid::periodic(&[12, 12], &[2.0 * PI, 2.0 * PI]).unwrap();
        let p = params();
        let d = random_smooth_field(&g, 2, 0.3, 1).map(|x| *x + Vec3::unit(2)).normalized();
        let v = random_smooth_field(&g, 2, 0.5, 2);
        let cfg = SchemeConfig::new(&g, 1e-3, 1e-2);
        let s = prepare_initial_state(&v, &d, &p, &cfg).unwrap();
        (g, p, s, cfg)
    }

    #[test]
    fn rhs_structure() {
        let (g, p, s, mut cfg) = setup();
        cfg.h = random_smooth_field(&g, 1, 0.4, 3);
        let r = rhs_terms(&s.v, &s.d, 0.0, &p, &cfg).unwrap();
        for (x, y) in s.d.data().iter().zip(r.dd_dt.data()) {
            assert!(x.dot(y).abs() < 1e-12);
        }
        for (x, y) in s.d.data().iter().zip(r.q_n.data()) {
            assert!(x.cross(y).dot(x).abs() < 1e-12);
        }
        // Ericksen force and director convection cancel in the energy.
        let a = grad(&s.d);
        let m = |x: &Vec3<f64>, y: &Vec3<f64>| *y * x.norm_sq() - *x * x.dot(y);
        let e = s.d.zip_map(&r.q_n, |x, q| m(x, q));
        let f1 = Field::from_vec(&g, (0..g.len()).map(|i| a.data()[i].tr_mul_vec(&e.data()[i])).collect::<Vec<_>>());
        let conv = Field::from_vec(&g, (0..g.len()).map(|i| a.data()[i].mul_vec(&s.v.data()[i])).collect::<Vec<_>>());
        let c2 = s.d.zip_map(&conv, |x, y| m(x, y));
        assert!((f1.inner(&s.v) - c2.inner(&r.q_n)).abs() < 1e-11);
    }

    #[test]
    fn equilibrium_has_zero_rates_and_constant_trace() {
        let g = Grid::periodic(&[8, 8], &[1.0, 1.0]).unwrap();
        let p = params();
        let s = FieldState::new(VectorField::zeros(&g), VectorField::constant(&g, Vec3::unit(0)), 0.0).unwrap();
        let cfg = SchemeConfig::new(&g, 1e-3, 5e-3);
        let (dv, dd) = assemble_rhs(&s, &p, &cfg).unwrap();
        assert!(dv.linf_norm() < 1e-14 && dd.linf_norm() < 1e-14);
        let tr = integrate(&s, &p, &cfg).unwrap();
        assert_eq!(tr.len(), 6);
        assert!(tr.max_abs_residual() <= 1e-14);
        assert!(tr.states.iter().all(|st| (&st.d - &s.d).linf_norm() < 1e-14));
    }

    #[test]
    fn constant_director_rate() {
        let g = Grid::periodic(&[8, 8], &[2.0 * PI, 2.0 * PI]).unwrap();
        let p = params();
        let d0 = Vec3::new(0.6, 0.0, 0.8);
        let v = leray_project(&random_smooth_field(&g, 2, 1.0, 8), None).unwrap();
        let s = FieldState::new(v.clone(), VectorField::constant(&g, d0), 0.0).unwrap();
        let cfg = SchemeConfig::new(&g, 1e-3, 1e-3);
        let (_, dd) = assemble_rhs(&s, &p, &cfg).unwrap();
        let gv = grad(&v);
        for i in 0..g.len() {
            let gi = gv.data()[i];
            let x = gi.sym().mul_vec(&d0) * p.lambda - gi.skw().mul_vec(&d0);
            let expect = -(x - d0 * d0.dot(&x));
            assert!((dd.data()[i] - expect).max_abs() < 1e-12);
        }
    }

    #[test]
    fn convection_is_skew() {
        let (g, _, s, _) = setup();
        let vv = s.v.map(|x| x.outer(x));
        let gv = grad(&s.v);
        let cf = div_matrix(&vv);
        let b = Field::from_vec(&g, (0..g.len()).map(|i| (gv.data()[i].mul_vec(&s.v.data()[i]) + cf.data()[i]) * 0.5).collect::<Vec<_>>());
        assert!(b.inner(&s.v).abs() < 1e-12);
    }

    #[test]
    fn energy_balance_and_norm_are_tight() {
        let (_, p, s, cfg) = setup();
        let tr = integrate(&s, &p, &cfg).unwrap();
        assert!(tr.max_abs_residual() < 1e-8, "{}", tr.max_abs_residual());
        assert!(tr.max_norm_deviation < 1e-9);
        let rep = energy_report(&tr, &p, &cfg, ResidualQuadrature::Integrator).unwrap();
        assert_eq!(rep.coercivity_violations, 0);
    }

    #[test]
    fn euler_residual_is_first_order() {
        let (_, p, s, mut cfg) = setup();
        cfg.integrator = Integrator::Euler;
        cfg.t_end = 0.02;
        cfg.dt = 2e-3;
        let a = integrate(&s, &p, &cfg).unwrap().max_abs_residual();
        cfg.dt = 1e-3;
        let b = integrate(&s, &p, &cfg).unwrap().max_abs_residual();
        let order = (a / b).log2();
        assert!((0.8..1.3).contains(&order), "{order}");
    }

    #[test]
    fn invalid_configs_and_blowup() {
        let (g, p, s, mut cfg) = setup();
        cfg.dt = 0.0;
        assert!(matches!(integrate(&s, &p, &cfg), Err(SchemeError::InvalidConfig(_))));
        let mut cfg = SchemeConfig::new(&g, 1.0, 50.0);
        cfg.integrator = Integrator::Euler;
        assert!(matches!(integrate(&s, &p, &cfg), Err(SchemeError::BlowUp { .. })));
    }
}
