//! Relative energy between a computed trajectory and a smooth test
//! trajectory, and evaluation of the dissipative-solution inequality
//!
//! ```text
//! ½E(t) + ‖H − H̃‖² + ½∫₀ᵗ W e^{∫ₛᵗK} ≤ D₀ e^{∫₀ᵗK} + ∫₀ᵗ (A, (ṽ − v, d×(q̃ − q + a))) e^{∫ₛᵗK}
//! ```
//!
//! on the sample times of a [`SimulationTrace`]. Time integrals use the
//! trapezoid rule on those samples; `∫ₛᵗK` is the difference of a running
//! cumulative integral.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{elastic_partials_tensor, magnetic_force, project_q, q_tensor_from_grad};
use crate::fields::{
    check_same_grid, director_project, div_matrix, grad, leray_project, w13_norm, Field, FieldError, Grid,
    MatrixField, VectorField,
};
use crate::material::{lambda_energy_fast, MaterialParams};
use crate::scalar::{pairwise_sum_by, Real};
use crate::scheme::{assemble_rhs, leslie_stress_node, FieldState, SchemeConfig, SchemeError, SimulationTrace};
use crate::tensor::{rank4_double_contract, Mat3, Rank3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RelativeEnergyError {
    #[error("test director is not unit length at t = {t:e} (max deviation {deviation:e})")]
    NotUnit { t: f64, deviation: f64 },
    #[error("trace has no sample at t = {0:e}")]
    NoSample(f64),
    #[error("invalid certificate input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

/// A test trajectory sampled on the grid at one time.
#[derive(Clone, Debug)]
pub struct TestSample<T: Real> {
    pub t: T,
    pub v: VectorField<T>,
    pub d: VectorField<T>,
    pub v_rate: VectorField<T>,
    pub d_rate: VectorField<T>,
}

impl<T: Real> TestSample<T> {
    pub fn state(&self) -> FieldState<T> {
        FieldState { v: self.v.clone(), d: self.d.clone(), t: self.t }
    }
}

/// Smooth comparison data `(ṽ, d̃)` with a static field `H̃`.
pub trait TestTrajectory<T: Real> {
    fn label(&self) -> String;

    fn sample(&self, grid: &Arc<Grid<T>>, t: T) -> Result<TestSample<T>, RelativeEnergyError>;

    fn magnetic(&self, grid: &Arc<Grid<T>>) -> VectorField<T>;

    /// Allowed nodal deviation of `|d̃|` from one.
    fn unit_tolerance(&self) -> T {
        T::lit(1e-10)
    }
}

fn unit_deviation<T: Real>(d: &VectorField<T>) -> T {
    d.data().iter().fold(T::zero(), |m, x| m.max((x.norm() - T::one()).abs()))
}

fn check_unit<T: Real>(s: &TestSample<T>, tol: T) -> Result<(), RelativeEnergyError> {
    let dev = unit_deviation(&s.d);
    if dev <= tol {
        Ok(())
    } else {
        Err(RelativeEnergyError::NotUnit { t: s.t.to_f64_lossy(), deviation: dev.to_f64_lossy() })
    }
}

/// Checks `|d̃| = 1` at every requested time.
pub fn register_trajectory<T: Real>(
    traj: &dyn TestTrajectory<T>,
    grid: &Arc<Grid<T>>,
    times: &[T],
) -> Result<(), RelativeEnergyError> {
    for &t in times {
        check_unit(&traj.sample(grid, t)?, traj.unit_tolerance())?;
    }
    Ok(())
}

pub type SpaceTimeFn<T> = Arc<dyn Fn(T, [T; 3]) -> Vec3<T> + Send + Sync>;
pub type SpaceFn<T> = Arc<dyn Fn([T; 3]) -> Vec3<T> + Send + Sync>;

/// Closed-form `ṽ(t, x)`, `d̃(t, x)`. Missing time derivatives are taken by
/// a fourth-order central difference in `t`.
#[derive(Clone)]
pub struct ClosedFormTrajectory<T: Real> {
    pub name: String,
    pub v: SpaceTimeFn<T>,
    pub d: SpaceTimeFn<T>,
    pub v_t: Option<SpaceTimeFn<T>>,
    pub d_t: Option<SpaceTimeFn<T>>,
    pub h: Option<SpaceFn<T>>,
    pub fd_step: T,
}

impl<T: Real> ClosedFormTrajectory<T> {
    pub fn new(name: &str, v: SpaceTimeFn<T>, d: SpaceTimeFn<T>) -> Self {
        ClosedFormTrajectory { name: name.into(), v, d, v_t: None, d_t: None, h: None, fd_step: T::lit(1e-3) }
    }

    pub fn with_rates(mut self, v_t: SpaceTimeFn<T>, d_t: SpaceTimeFn<T>) -> Self {
        self.v_t = Some(v_t);
        self.d_t = Some(d_t);
        self
    }

    pub fn with_field(mut self, h: SpaceFn<T>) -> Self {
        self.h = Some(h);
        self
    }
}

fn central_rate<T: Real>(f: &SpaceTimeFn<T>, t: T, x: [T; 3], h: T) -> Vec3<T> {
    let two = T::lit(2.0);
    let a = f(t + h, x) - f(t - h, x);
    let b = f(t + two * h, x) - f(t - two * h, x);
    (a * T::lit(8.0) - b) * (T::one() / (T::lit(12.0) * h))
}

impl<T: Real> TestTrajectory<T> for ClosedFormTrajectory<T> {
    fn label(&self) -> String {
        self.name.clone()
    }

    fn sample(&self, grid: &Arc<Grid<T>>, t: T) -> Result<TestSample<T>, RelativeEnergyError> {
        let h = self.fd_step;
        let rate = |exact: &Option<SpaceTimeFn<T>>, f: &SpaceTimeFn<T>| match exact {
            Some(e) => VectorField::from_fn(grid, |x| e(t, x)),
            None => VectorField::from_fn(grid, |x| central_rate(f, t, x, h)),
        };
        Ok(TestSample {
            t,
            v: VectorField::from_fn(grid, |x| (self.v)(t, x)),
            d: VectorField::from_fn(grid, |x| (self.d)(t, x)),
            v_rate: rate(&self.v_t, &self.v),
            d_rate: rate(&self.d_t, &self.d),
        })
    }

    fn magnetic(&self, grid: &Arc<Grid<T>>) -> VectorField<T> {
        match &self.h {
            Some(h) => VectorField::from_fn(grid, |x| h(x)),
            None => VectorField::zeros(grid),
        }
    }
}

/// `ṽ = 0`, `d̃ ≡ d₀`, `H̃ = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Equilibrium<T> {
    director: Vec3<T>,
}

impl<T: Real> Equilibrium<T> {
    /// Normalizes `d0`; a zero vector is rejected.
    pub fn new(d0: Vec3<T>) -> Result<Self, RelativeEnergyError> {
        let n = d0.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(RelativeEnergyError::Invalid("equilibrium director must be nonzero".into()));
        }
        Ok(Equilibrium { director: d0 * (T::one() / n) })
    }

    pub fn director(&self) -> Vec3<T> {
        self.director
    }
}

impl<T: Real> TestTrajectory<T> for Equilibrium<T> {
    fn label(&self) -> String {
        "equilibrium".into()
    }

    fn sample(&self, grid: &Arc<Grid<T>>, t: T) -> Result<TestSample<T>, RelativeEnergyError> {
        Ok(TestSample {
            t,
            v: VectorField::zeros(grid),
            d: VectorField::constant(grid, self.director),
            v_rate: VectorField::zeros(grid),
            d_rate: VectorField::zeros(grid),
        })
    }

    fn magnetic(&self, grid: &Arc<Grid<T>>) -> VectorField<T> {
        VectorField::zeros(grid)
    }
}

/// The recorded states of a run used as test data, with time derivatives
/// from the scheme right-hand side. Only the recorded times can be sampled.
///
/// A computed director is unit length only up to the time-stepping error,
/// so the registration tolerance is the trace's own deviation.
#[derive(Clone, Debug)]
pub struct TraceTrajectory<T: Real> {
    states: Vec<FieldState<T>>,
    rates: Vec<(VectorField<T>, VectorField<T>)>,
    h: VectorField<T>,
    tol: T,
}

impl<T: Real> TraceTrajectory<T> {
    pub fn from_trace(
        trace: &SimulationTrace<T>,
        p: &MaterialParams<T>,
        cfg: &SchemeConfig<T>,
    ) -> Result<Self, RelativeEnergyError> {
        let rates = trace.states.iter().map(|s| assemble_rhs(s, p, cfg)).collect::<Result<Vec<_>, _>>()?;
        let dev = trace.states.iter().fold(T::zero(), |m, s| m.max(unit_deviation(&s.d)));
        Ok(TraceTrajectory { states: trace.states.clone(), rates, h: cfg.h.clone(), tol: dev.max(T::lit(1e-10)) })
    }
}

impl<T: Real> TestTrajectory<T> for TraceTrajectory<T> {
    fn label(&self) -> String {
        "trace".into()
    }

    fn sample(&self, grid: &Arc<Grid<T>>, t: T) -> Result<TestSample<T>, RelativeEnergyError> {
        let eps = T::lit(1e-9) * (T::one() + t.abs());
        let i = self
            .states
            .iter()
            .position(|s| (s.t - t).abs() <= eps)
            .ok_or(RelativeEnergyError::NoSample(t.to_f64_lossy()))?;
        let s = &self.states[i];
        check_same_grid(grid, s.grid())?;
        Ok(TestSample { t, v: s.v.clone(), d: s.d.clone(), v_rate: self.rates[i].0.clone(), d_rate: self.rates[i].1.clone() })
    }

    fn magnetic(&self, _grid: &Arc<Grid<T>>) -> VectorField<T> {
        self.h.clone()
    }

    fn unit_tolerance(&self) -> T {
        self.tol
    }
}

/// Integrated terms of `E`; each is nonnegative for `χ∥, χ⊥ ≤ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RelativeEnergyTerms<T> {
    pub kinetic: T,
    /// `½(∇d − ∇d̃; Λ:(∇d − ∇d̃))`
    pub lambda: T,
    /// `½(G − G̃)⋮Θ⋮(G − G̃)`
    pub theta: T,
    pub magnetic_par: T,
    pub magnetic_perp: T,
}

impl<T: Real> RelativeEnergyTerms<T> {
    pub fn total(&self) -> T {
        self.kinetic + self.lambda + self.theta + self.magnetic_par + self.magnetic_perp
    }
}

fn same_grids<T: Real>(fields: &[&VectorField<T>]) -> Result<(), RelativeEnergyError> {
    for f in &fields[1..] {
        check_same_grid(fields[0].grid(), f.grid())?;
    }
    Ok(())
}

fn integrate_nodes<T: Real, const N: usize, F: Fn(usize) -> [T; N]>(g: &Grid<T>, f: F) -> [T; N] {
    let vals: Vec<[T; N]> = (0..g.len()).map(f).collect();
    let w = g.weights();
    std::array::from_fn(|k| pairwise_sum_by(vals.len(), |i| w[i] * vals[i][k]))
}

/// Terms of the relative energy `E(v, d, H | ṽ, d̃, H̃)`.
pub fn rel_energy_terms<T: Real>(
    state: &FieldState<T>,
    h: &VectorField<T>,
    test: &FieldState<T>,
    h_tilde: &VectorField<T>,
    p: &MaterialParams<T>,
) -> Result<RelativeEnergyTerms<T>, RelativeEnergyError> {
    same_grids(&[&state.v, &state.d, h, &test.v, &test.d, h_tilde])?;
    let (a, at) = (grad(&state.d), grad(&test.d));
    let half = T::lit(0.5);
    let theta = p.theta_sparse();
    let parts = integrate_nodes(state.d.grid(), |i| {
        let (d, dt) = (state.d.data()[i], test.d.data()[i]);
        let (hv, ht) = (h.data()[i], h_tilde.data()[i]);
        let x = a.data()[i] - at.data()[i];
        let dg = &a.data()[i].outer_vec(&d) - &at.data()[i].outer_vec(&dt);
        let dh = d.dot(&hv) - dt.dot(&ht);
        [
            half * (state.v.data()[i] - test.v.data()[i]).norm_sq(),
            half * rank4_double_contract(&p.lambda_tensor, &x).frob(&x),
            half * theta.contract3(&dg).triple_dot(&dg),
            -half * p.chi_par * dh * dh,
            -half * p.chi_perp * (d.cross(&hv) - dt.cross(&ht)).norm_sq(),
        ]
    });
    Ok(RelativeEnergyTerms {
        kinetic: parts[0],
        lambda: parts[1],
        theta: parts[2],
        magnetic_par: parts[3],
        magnetic_perp: parts[4],
    })
}

pub fn rel_energy<T: Real>(
    state: &FieldState<T>,
    h: &VectorField<T>,
    test: &FieldState<T>,
    h_tilde: &VectorField<T>,
    p: &MaterialParams<T>,
) -> Result<T, RelativeEnergyError> {
    Ok(rel_energy_terms(state, h, test, h_tilde, p)?.total())
}

/// The same functional written through `div`, `curl` and `skw ∇d` with the
/// constants `k₁..k₅`.
pub fn rel_energy_expanded<T: Real>(
    state: &FieldState<T>,
    h: &VectorField<T>,
    test: &FieldState<T>,
    h_tilde: &VectorField<T>,
    p: &MaterialParams<T>,
) -> Result<T, RelativeEnergyError> {
    same_grids(&[&state.v, &state.d, h, &test.v, &test.d, h_tilde])?;
    let (a, at) = (grad(&state.d), grad(&test.d));
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let [k1, k2, k3, k4, k5] = p.k;
    let curl = |m: &Mat3<T>| Vec3([m.0[2][1] - m.0[1][2], m.0[0][2] - m.0[2][0], m.0[1][0] - m.0[0][1]]);
    let [total] = integrate_nodes(state.d.grid(), |i| {
        let (d, dt) = (state.d.data()[i], test.d.data()[i]);
        let (am, atm) = (a.data()[i], at.data()[i]);
        let (hv, ht) = (h.data()[i], h_tilde.data()[i]);
        let (s, st) = (am.trace(), atm.trace());
        let t3 = d * s - dt * st;
        let t4 = d.dot(&curl(&am)) - dt.dot(&curl(&atm));
        let t5 = am.skw().mul_vec(&d) - atm.skw().mul_vec(&dt);
        let dh = d.dot(&hv) - dt.dot(&ht);
        [half * (state.v.data()[i] - test.v.data()[i]).norm_sq()
            + lambda_energy_fast(k1, k2, &(am - atm))
            + half * k3 * t3.norm_sq()
            + half * k4 * t4 * t4
            + two * k5 * t5.norm_sq()
            - half * p.chi_par * dh * dh
            - half * p.chi_perp * (d.cross(&hv) - dt.cross(&ht)).norm_sq()]
    });
    Ok(total)
}

/// Relative dissipation `W(v, d | ṽ, d̃)`; `q`, `q̃` are the variational
/// derivatives belonging to `d` and `d̃`.
pub fn rel_dissipation<T: Real>(
    state: &FieldState<T>,
    q: &VectorField<T>,
    test: &FieldState<T>,
    q_tilde: &VectorField<T>,
    p: &MaterialParams<T>,
) -> Result<T, RelativeEnergyError> {
    same_grids(&[&state.v, &state.d, q, &test.v, &test.d, q_tilde])?;
    let (gv, gvt) = (grad(&state.v), grad(&test.v));
    let [w] = integrate_nodes(state.d.grid(), |i| {
        let (d, dt) = (state.d.data()[i], test.d.data()[i]);
        let (dm, dmt) = (gv.data()[i].sym(), gvt.data()[i].sym());
        let (dd, ddt) = (dm.mul_vec(&d), dmt.mul_vec(&dt));
        let x = d.dot(&dd) - dt.dot(&ddt);
        [p.visc_dd() * x * x
            + p.visc_iso() * (dm - dmt).norm_sq()
            + p.visc_d() * (dd - ddt).norm_sq()
            + (d.cross(&q.data()[i]) - dt.cross(&q_tilde.data()[i])).norm_sq()]
    });
    Ok(w)
}

/// `K(s)/C`: `‖ṽ‖²_∞ + ‖∇ṽ‖²_{L³} + ‖q̃‖²_{L³} + ‖∂ₜd̃‖_∞ + ‖∂ₜd̃‖_{W^{1,3}} + ‖∂ₜd̃‖²_{L³}`.
pub fn regularity_norms<T: Real>(sample: &TestSample<T>, q_tilde: &VectorField<T>) -> T {
    let three = T::lit(3.0);
    let sq = |x: T| x * x;
    sq(sample.v.linf_norm())
        + sq(grad(&sample.v).lp_norm(three))
        + sq(q_tilde.lp_norm(three))
        + sample.d_rate.linf_norm()
        + w13_norm(&sample.d_rate)
        + sq(sample.d_rate.lp_norm(three))
}

/// The Gronwall weight `K(s)` with `q̃` the unprojected variational
/// derivative of `d̃` in the field `H̃`.
pub fn regularity_weight<T: Real>(
    p: &MaterialParams<T>,
    sample: &TestSample<T>,
    h_tilde: &VectorField<T>,
    c: T,
) -> Result<T, RelativeEnergyError> {
    if !(c >= T::zero()) {
        return Err(RelativeEnergyError::Invalid("regularity constant must be nonnegative".into()));
    }
    same_grids(&[&sample.d, h_tilde])?;
    let qt = q_tensor_from_grad(p, &sample.d, &grad(&sample.d), h_tilde);
    Ok(c * regularity_norms(sample, &qt))
}

/// `Γ = Θ⋮(∇d̃ ⊗ d̃)` at every node.
fn theta_of_test<T: Real>(p: &MaterialParams<T>, dt: &VectorField<T>, at: &MatrixField<T>) -> Vec<Rank3<T>> {
    let theta = p.theta_sparse();
    dt.data().iter().zip(at.data()).map(|(d, a)| theta.contract3(&a.outer_vec(d))).collect()
}

/// Initial distance `D₀ = E + (1/2k)‖(d − d̃)·Γ‖² + ((∇d − ∇d̃) ⊗ (d − d̃))⋮Γ`.
pub fn initial_distance<T: Real>(
    state0: &FieldState<T>,
    h: &VectorField<T>,
    test0: &FieldState<T>,
    h_tilde: &VectorField<T>,
    p: &MaterialParams<T>,
) -> Result<T, RelativeEnergyError> {
    let e = rel_energy(state0, h, test0, h_tilde, p)?;
    let (a, at) = (grad(&state0.d), grad(&test0.d));
    let gamma = theta_of_test(p, &test0.d, &at);
    let inv2k = T::one() / (T::lit(2.0) * p.k_coercive);
    let [extra] = integrate_nodes(state0.d.grid(), |i| {
        let x = state0.d.data()[i] - test0.d.data()[i];
        let m = gamma[i].contract_last(&x);
        let cross = (a.data()[i] - at.data()[i]).outer_vec(&x).triple_dot(&gamma[i]);
        [inv2k * m.norm_sq() + cross]
    });
    Ok(e + extra)
}

/// Correction `a(d, H | d̃, H̃) = (1/k)((d̃ − d)·Γ):Γ + χ∥(H̃ − H)(d̃·H̃) − χ⊥(H̃ − H)×(H̃×d̃)`.
pub fn correction<T: Real>(
    p: &MaterialParams<T>,
    d: &VectorField<T>,
    h: &VectorField<T>,
    d_tilde: &VectorField<T>,
    h_tilde: &VectorField<T>,
) -> Result<VectorField<T>, RelativeEnergyError> {
    same_grids(&[d, h, d_tilde, h_tilde])?;
    let gamma = theta_of_test(p, d_tilde, &grad(d_tilde));
    Ok(correction_with(p, d, h, d_tilde, h_tilde, &gamma))
}

fn correction_with<T: Real>(
    p: &MaterialParams<T>,
    d: &VectorField<T>,
    h: &VectorField<T>,
    d_tilde: &VectorField<T>,
    h_tilde: &VectorField<T>,
    gamma: &[Rank3<T>],
) -> VectorField<T> {
    let inv_k = T::one() / p.k_coercive;
    let data = (0..d.data().len())
        .map(|i| {
            let (dt, ht) = (d_tilde.data()[i], h_tilde.data()[i]);
            let dh = ht - h.data()[i];
            let m = gamma[i].contract_last(&(dt - d.data()[i]));
            m.contract_rank3(&gamma[i]) * inv_k + dh * (p.chi_par * dt.dot(&ht)) - dh.cross(&ht.cross(&dt)) * p.chi_perp
        })
        .collect();
    Field::from_vec(d.grid(), data)
}

/// Which form of the inequality is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingVariant {
    /// Unprojected `q`, `q̃` and the Ericksen stress `div(∇d̃ᵀ ∂F/∂∇d̃)`.
    #[default]
    Continuous,
    /// Projected `q_n`, `q̃_n = R q̃` and the force `−∇d̃ᵀ(|d̃|²I − d̃⊗d̃) q̃_n`,
    /// as in the semi-discrete scheme.
    Discrete,
}

/// Residual of the test data in the two equations.
#[derive(Clone, Debug)]
pub struct EquationResidual<T: Real> {
    pub momentum: VectorField<T>,
    pub director: VectorField<T>,
    /// The `q̃` (or `q̃_n`) used.
    pub q_tilde: VectorField<T>,
}

fn variant_q<T: Real>(
    p: &MaterialParams<T>,
    d: &VectorField<T>,
    a: &MatrixField<T>,
    h: &VectorField<T>,
    variant: PairingVariant,
    cfg: Option<&SchemeConfig<T>>,
) -> VectorField<T> {
    let q = q_tensor_from_grad(p, d, a, h);
    match (variant, cfg) {
        (PairingVariant::Discrete, Some(cfg)) => project_q(p, d, &q, &cfg.director_projection),
        _ => q,
    }
}

/// `A(ṽ, d̃)` with body force `g` (zero when `None`). For the discrete
/// variant `cfg` supplies the director projection.
pub fn equation_residual<T: Real>(
    p: &MaterialParams<T>,
    sample: &TestSample<T>,
    h_tilde: &VectorField<T>,
    g: Option<&VectorField<T>>,
    variant: PairingVariant,
    cfg: Option<&SchemeConfig<T>>,
) -> Result<EquationResidual<T>, RelativeEnergyError> {
    same_grids(&[&sample.v, &sample.d, &sample.v_rate, &sample.d_rate, h_tilde])?;
    if let Some(g) = g {
        same_grids(&[&sample.v, g])?;
    }
    if variant == PairingVariant::Discrete && cfg.is_none() {
        return Err(RelativeEnergyError::Invalid("discrete residual needs the scheme configuration".into()));
    }
    let grid = sample.d.grid();
    let (v, d) = (&sample.v, &sample.d);
    let a = grad(d);
    let gv = grad(v);
    let qt = variant_q(p, d, &a, h_tilde, variant, cfg);
    let n = grid.len();
    let mut stress = Vec::with_capacity(n);
    let mut ericksen = Vec::with_capacity(n);
    let mut local = Vec::with_capacity(n);
    let mut dir = Vec::with_capacity(n);
    for i in 0..n {
        let (di, ai, gi, qi, vi) = (d.data()[i], a.data()[i], gv.data()[i], qt.data()[i], v.data()[i]);
        stress.push(leslie_stress_node(p, &di, &gi, &qi));
        match variant {
            PairingVariant::Continuous => {
                let (_, fa) = elastic_partials_tensor(p, &di, &ai);
                ericksen.push(ai.transpose().mul_mat(&fa));
                local.push(gi.mul_vec(&vi));
            }
            PairingVariant::Discrete => {
                let mq = qi * di.norm_sq() - di * di.dot(&qi);
                ericksen.push(Mat3::zero());
                local.push(gi.mul_vec(&vi) - ai.tr_mul_vec(&mq));
            }
        }
        let inner = sample.d_rate.data()[i] + ai.mul_vec(&vi) - gi.skw().mul_vec(&di)
            + gi.sym().mul_vec(&di) * p.lambda
            + qi;
        dir.push(di.cross(&inner));
    }
    let div_stress = div_matrix(&Field::from_vec(grid, stress));
    let div_ericksen = div_matrix(&Field::from_vec(grid, ericksen));
    let momentum = (0..n)
        .map(|i| {
            let mut r = sample.v_rate.data()[i] + local[i] + div_ericksen.data()[i] - div_stress.data()[i];
            if let Some(g) = g {
                r = r - g.data()[i];
            }
            r
        })
        .collect();
    Ok(EquationResidual { momentum: Field::from_vec(grid, momentum), director: Field::from_vec(grid, dir), q_tilde: qt })
}

/// Body force for which the test data satisfy the momentum equation
/// exactly (continuous form).
pub fn manufactured_forcing<T: Real>(
    p: &MaterialParams<T>,
    sample: &TestSample<T>,
    h_tilde: &VectorField<T>,
) -> Result<VectorField<T>, RelativeEnergyError> {
    Ok(equation_residual(p, sample, h_tilde, None, PairingVariant::Continuous, None)?.momentum)
}

/// `⟨l, q(h)⟩ = (∇l; ∂f/∂∇h) + (l, ∂f/∂h)`, the weak form of `(l, q(h))`.
fn weak_q_pairing<T: Real>(p: &MaterialParams<T>, l: &VectorField<T>, d: &VectorField<T>, h: &VectorField<T>) -> T {
    let (gl, a) = (grad(l), grad(d));
    let [s] = integrate_nodes(d.grid(), |i| {
        let (fd, fa) = elastic_partials_tensor(p, &d.data()[i], &a.data()[i]);
        let fd = fd + magnetic_force(p, &d.data()[i], &h.data()[i]);
        [gl.data()[i].frob(&fa) + l.data()[i].dot(&fd)]
    });
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertificateOptions<T> {
    /// Fixed constant in `K`; `None` searches for the minimal admissible one.
    pub c: Option<T>,
    pub tol: T,
    pub c_max: T,
    pub variant: PairingVariant,
    /// Add the projection-error terms of the semi-discrete inequality.
    pub extra_terms: bool,
}

impl<T: Real> Default for CertificateOptions<T> {
    fn default() -> Self {
        CertificateOptions {
            c: None,
            tol: T::lit(1e-6),
            c_max: T::lit(1e6),
            variant: PairingVariant::Continuous,
            extra_terms: false,
        }
    }
}

/// Time-local ingredients of the inequality at one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSample {
    pub t: f64,
    pub rel_energy: f64,
    /// `‖H − H̃‖²`
    pub field_gap: f64,
    pub rel_dissipation: f64,
    /// `K/C`
    pub regularity: f64,
    /// `(A, (ṽ − v, d×(q̃ − q + a)))`
    pub pairing: f64,
    /// Sum of the projection-error terms (zero unless requested).
    pub extra: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub label: String,
    pub variant: PairingVariant,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub slack: Vec<f64>,
    /// Constant the columns were evaluated at; `∞` if none up to `c_max`
    /// works (the columns are then evaluated at `c_max`).
    pub c: f64,
    pub pass: bool,
    pub tol: f64,
    pub initial_distance: f64,
    pub samples: Vec<CertificateSample>,
    pub warnings: Vec<String>,
}

/// Compact summary for machine consumption.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub label: String,
    pub variant: PairingVariant,
    pub samples: usize,
    /// `None` when no admissible constant exists up to the search bound.
    pub minimal_c: Option<f64>,
    pub pass: bool,
    pub tol: f64,
    pub min_slack: f64,
    pub max_lhs: f64,
    pub warnings: Vec<String>,
}

impl CertificateReport {
    pub const CSV_HEADER: &'static str = "t,lhs,rhs,slack";

    pub fn csv_rows(&self) -> impl Iterator<Item = String> + '_ {
        (0..self.times.len()).map(|i| format!("{:e},{:e},{:e},{:e}", self.times[i], self.lhs[i], self.rhs[i], self.slack[i]))
    }

    pub fn min_slack(&self) -> f64 {
        self.slack.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_lhs(&self) -> f64 {
        self.lhs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            label: self.label.clone(),
            variant: self.variant,
            samples: self.times.len(),
            minimal_c: self.c.is_finite().then_some(self.c),
            pass: self.pass,
            tol: self.tol,
            min_slack: self.min_slack(),
            max_lhs: self.max_lhs(),
            warnings: self.warnings.clone(),
        }
    }
}

const MIN_SAMPLES: usize = 8;

/// `(lhs, rhs)` at every sample for a given `C`.
pub fn certificate_columns(samples: &[CertificateSample], d0: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let mut ik = vec![0.0; n];
    for j in 1..n {
        let h = samples[j].t - samples[j - 1].t;
        ik[j] = ik[j - 1] + 0.5 * h * c * (samples[j - 1].regularity + samples[j].regularity);
    }
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let mut wint = 0.0;
        let mut pint = 0.0;
        for j in 0..i {
            let h = samples[j + 1].t - samples[j].t;
            let (e0, e1) = ((ik[i] - ik[j]).exp(), (ik[i] - ik[j + 1]).exp());
            wint += 0.5 * h * (samples[j].rel_dissipation * e0 + samples[j + 1].rel_dissipation * e1);
            let (p0, p1) = (samples[j].pairing + samples[j].extra, samples[j + 1].pairing + samples[j + 1].extra);
            pint += 0.5 * h * (p0 * e0 + p1 * e1);
        }
        let s = &samples[i];
        lhs.push(0.5 * s.rel_energy + s.field_gap + 0.5 * wint);
        rhs.push(d0 * ik[i].exp() + pint);
    }
    (lhs, rhs)
}

fn passes(samples: &[CertificateSample], d0: f64, c: f64, tol: f64) -> bool {
    let (l, r) = certificate_columns(samples, d0, c);
    l.iter().zip(&r).all(|(l, r)| r - l >= -tol)
}

/// Smallest `C ∈ [0, c_max]` with `slack ≥ −tol` at every sample, found by
/// bisection (the pass set is assumed to be an interval ending at `c_max`).
/// Returns `∞` if `c_max` fails.
pub fn minimal_constant(samples: &[CertificateSample], d0: f64, tol: f64, c_max: f64) -> f64 {
    if passes(samples, d0, 0.0, tol) {
        return 0.0;
    }
    if !passes(samples, d0, c_max, tol) {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, c_max);
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if passes(samples, d0, mid, tol) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Evaluates the inequality for `trace` against `test` at every recorded
/// time of the trace. The field `H` and the body force are taken from
/// `cfg`.
pub fn certificate<T: Real>(
    trace: &SimulationTrace<T>,
    p: &MaterialParams<T>,
    cfg: &SchemeConfig<T>,
    test: &dyn TestTrajectory<T>,
    opts: &CertificateOptions<T>,
) -> Result<CertificateReport, RelativeEnergyError> {
    if trace.is_empty() {
        return Err(RelativeEnergyError::Invalid("empty trace".into()));
    }
    if !(opts.tol >= T::zero()) || !(opts.c_max >= T::zero()) {
        return Err(RelativeEnergyError::Invalid("tolerance and c_max must be nonnegative".into()));
    }
    if let Some(c) = opts.c {
        if !(c >= T::zero()) {
            return Err(RelativeEnergyError::Invalid("C must be nonnegative".into()));
        }
    }
    let grid = trace.states[0].grid().clone();
    let h = &cfg.h;
    let ht = test.magnetic(&grid);
    same_grids(&[&trace.states[0].d, h, &ht])?;
    let field_gap = (h - &ht).l2_norm_sq().to_f64_lossy();
    let dproj = cfg.director_projection.cutoff();
    let variant = opts.variant;

    let mut warnings = Vec::new();
    if trace.len() < MIN_SAMPLES {
        warnings.push(format!(
            "only {} time samples; trapezoid quadrature of the time integrals is poorly resolved (want at least {MIN_SAMPLES})",
            trace.len()
        ));
    }

    let mut samples = Vec::with_capacity(trace.len());
    let mut d0 = 0.0;
    for (idx, st) in trace.states.iter().enumerate() {
        let ts = test.sample(&grid, st.t)?;
        check_unit(&ts, test.unit_tolerance())?;
        let tstate = ts.state();
        let a = grad(&st.d);
        let q = variant_q(p, &st.d, &a, h, variant, Some(cfg));
        let g = cfg.forcing.sample(&grid, st.t);
        let res = equation_residual(p, &ts, &ht, g.as_ref(), variant, Some(cfg))?;
        let qt = &res.q_tilde;
        let gamma = theta_of_test(p, &ts.d, &grad(&ts.d));
        let corr = correction_with(p, &st.d, h, &ts.d, &ht, &gamma);

        let e = rel_energy(st, h, &tstate, &ht, p)?;
        let w = rel_dissipation(st, &q, &tstate, qt, p)?;
        let k = regularity_norms(&ts, qt);
        if idx == 0 {
            d0 = initial_distance(st, h, &tstate, &ht, p)?.to_f64_lossy();
        }
        let dv = &ts.v - &st.v;
        let zeta = &(qt - &q) + &corr;
        let dz = st.d.zip_map(&zeta, |d, z| d.cross(z));
        let pairing = res.momentum.inner(&dv) + res.director.inner(&dz);

        let extra = if opts.extra_terms {
            let n = grid.len();
            let ra = director_project(&corr, dproj);
            let ra_a = &ra - &corr;
            let mut total = T::zero();

            // ⟨(I − R)∂ₜd̃, q(d̃) − q(d)⟩
            let l = &ts.d_rate - &director_project(&ts.d_rate, dproj);
            total = total + weak_q_pairing(p, &l, &ts.d, &ht) - weak_q_pairing(p, &l, &st.d, h);

            // (A_n(v, d), (P ṽ − ṽ, d×(R a − a)))
            let (vr, dr) = assemble_rhs(st, p, cfg)?;
            let own = TestSample { t: st.t, v: st.v.clone(), d: st.d.clone(), v_rate: vr, d_rate: dr.clone() };
            let an = equation_residual(p, &own, h, g.as_ref(), PairingVariant::Discrete, Some(cfg))?;
            let pv = &leray_project(&ts.v, cfg.velocity_cutoff.as_ref())? - &ts.v;
            let dra = st.d.zip_map(&ra_a, |d, x| d.cross(x));
            total = total + an.momentum.inner(&pv) + an.director.inner(&dra);

            // (∂ₜd (|d|² − 1), R a − a)
            let stretch = dr.zip_map(&st.d, |r, d| *r * (d.norm_sq() - T::one()));
            total = total + stretch.inner(&ra_a);

            // ((1 − |d̃|²)∂ₜd̃ + ½∂ₜ|d̃|² d̃, q̃_n − q_n + a_n)
            let data = (0..n)
                .map(|i| {
                    let (d, r) = (ts.d.data()[i], ts.d_rate.data()[i]);
                    r * (T::one() - d.norm_sq()) + d * d.dot(&r)
                })
                .collect();
            total = total + Field::from_vec(&grid, data).inner(&zeta);
            total.to_f64_lossy()
        } else {
            0.0
        };

        samples.push(CertificateSample {
            t: st.t.to_f64_lossy(),
            rel_energy: e.to_f64_lossy(),
            field_gap,
            rel_dissipation: w.to_f64_lossy(),
            regularity: k.to_f64_lossy(),
            pairing: pairing.to_f64_lossy(),
            extra,
        });
    }

    let tol = opts.tol.to_f64_lossy();
    let c_max = opts.c_max.to_f64_lossy();
    let c = match opts.c {
        Some(c) => c.to_f64_lossy(),
        None => minimal_constant(&samples, d0, tol, c_max),
    };
    let (lhs, rhs) = certificate_columns(&samples, d0, if c.is_finite() { c } else { c_max });
    let slack: Vec<f64> = rhs.iter().zip(&lhs).map(|(r, l)| r - l).collect();
    let pass = c.is_finite() && slack.iter().all(|&s| s >= -tol);
    Ok(CertificateReport {
        label: format!("{} ({})", test.label(), match variant {
            PairingVariant::Continuous => "continuous pairing",
            PairingVariant::Discrete => "discrete pairing",
        }),
        variant,
        times: samples.iter().map(|s| s.t).collect(),
        lhs,
        rhs,
        slack,
        c,
        pass,
        tol,
        initial_distance: d0,
        samples,
        warnings,
    })
}
