use std::f64::consts::PI;
use std::sync::Arc;

use nematic::control::*;
use nematic::fields::{div, random_smooth_field, Grid};
use nematic::material::{build_params, MaterialInputs, MaterialParams};
use nematic::scheme::{integrate, prepare_initial_state, FieldState, SchemeConfig};
use nematic::tensor::Vec3;
use nematic::VectorField;

fn params() -> MaterialParams<f64> {
    build_params(MaterialInputs {
        frank: [2.0, 1.0, 3.0],
        mu: [1.0, 1.0, 0.5, 1.0, 2.0, 1.0],
        chi_par: -0.1,
        chi_perp: -0.3,
    })
    .unwrap()
}

fn grid() -> Arc<Grid<f64>> {
    Grid::periodic(&[12, 12], &[2.0 * PI, 2.0 * PI]).unwrap()
}

fn problem(h_star: Vec3<f64>, gamma: f64) -> ControlProblem<f64> {
    let p = params();
    let g = grid();
    let d = random_smooth_field(&g, 2, 0.5, 1).map(|x| *x + Vec3::unit(2)).normalized();
    let v = random_smooth_field(&g, 2, 0.3, 2);
    let mut cfg = SchemeConfig::new(&g, 5e-3, 0.1);
    cfg.record_every = 10;
    let s = prepare_initial_state(&v, &d, &p, &cfg).unwrap();
    let mut target_cfg = cfg.clone();
    target_cfg.h = VectorField::constant(&g, h_star);
    let target = integrate(&s, &p, &target_cfg).unwrap();
    ControlProblem {
        params: p,
        scheme: cfg,
        initial: s,
        v_target: target.final_state().v.clone(),
        d_target: target.final_state().d.clone(),
        gamma,
        c_h: 3.0,
        parametrization: Parametrization::Uniform,
        theta0: None,
        options: OptimizerOptions::default(),
    }
}

#[test]
fn cost_examples() {
    let g = grid();
    let d = random_smooth_field(&g, 2, 0.5, 3).normalized();
    let v = random_smooth_field(&g, 2, 0.5, 4);
    let s = FieldState::new(v.clone(), d.clone(), 0.0).unwrap();
    let zero = VectorField::zeros(&g);
    assert_eq!(cost_j(&s, &zero, &v, &d, 0.1).unwrap(), 0.0);
    let h = VectorField::constant(&g, Vec3::new(0.7, 0.0, 0.0));
    let j = cost_j(&s, &h, &v, &d, 0.1).unwrap();
    let expect = 0.1 * 0.49 * 4.0 * PI * PI;
    assert!((j - expect).abs() < 1e-12 * expect);
    let other = FieldState::new(zero.clone(), zero.clone(), 0.0).unwrap();
    assert!(cost_j(&other, &h, &v, &d, 0.1).unwrap() > j);
}

#[test]
fn projection_examples() {
    let g = grid();
    let h = random_smooth_field(&g, 2, 1.0, 5);
    let n = h.lp_norm(3.0);
    let inside = project_control(&h, 2.0 * n);
    assert_eq!(inside, h);
    let half = project_control(&h, 0.5 * n);
    assert!((half.lp_norm(3.0) - 0.5 * n).abs() < 1e-12);
    assert!((&half - &h.scale(0.5)).linf_norm() < 1e-15);
    let twice = project_control(&half, 0.5 * n);
    assert_eq!(twice, half);
}

#[test]
fn low_mode_basis_is_solenoidal_and_bounded() {
    let g = grid();
    let b = ControlBasis::new(&g, Parametrization::LowMode { max_mode: 2 }).unwrap();
    assert_eq!(b.dim(), 3 + 12 * 4);
    let theta: Vec<f64> = (0..b.dim()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
    let h = b.field(&theta);
    assert!(div(&h).linf_norm() < 1e-12);
    assert!(ControlBasis::new(&g, Parametrization::LowMode { max_mode: 3 }).is_err());
    let g3 = Grid::periodic(&[8, 8, 8], &[1.0, 1.0, 1.0]).unwrap();
    let b3 = ControlBasis::new(&g3, Parametrization::LowMode { max_mode: 1 }).unwrap();
    assert_eq!(b3.dim(), 3 + 13 * 4);
    assert!(div(&b3.field(&vec![1.0; b3.dim()])).linf_norm() < 1e-11);
    let gd = Grid::dirichlet(&[8, 8], &[1.0, 1.0]).unwrap();
    assert!(ControlBasis::new(&gd, Parametrization::LowMode { max_mode: 1 }).is_err());
}

#[test]
fn zero_field_targets_stop_immediately() {
    let prob = problem(Vec3::zero(), 1e-3);
    let r = optimize(&prob).unwrap();
    assert_eq!(r.stop, StopReason::ZeroCost);
    assert_eq!(r.j_history, vec![0.0]);
    assert_eq!(r.evaluations, 1);
}

#[test]
fn reduced_cost_is_deterministic_and_fd_consistent() {
    let prob = problem(Vec3::new(1.0, 0.5, 0.3), 1e-3);
    let mut rc = ReducedCost::new(&prob).unwrap();
    let theta = [0.4, -0.2, 0.6];
    let (j1, _) = rc.eval(&theta);
    let (j2, _) = rc.eval(&theta);
    assert_eq!(j1.to_bits(), j2.to_bits());

    let dir = [0.6, 0.0, -0.8];
    let deriv = |rc: &mut ReducedCost<f64>, h: f64| {
        let plus: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + h * d).collect();
        let minus: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t - h * d).collect();
        (rc.eval(&plus).0 - rc.eval(&minus).0) / (2.0 * h)
    };
    let a = deriv(&mut rc, 1e-3 * prob.c_h);
    let b = deriv(&mut rc, 1e-4 * prob.c_h);
    assert!(a.abs() > 1e-8);
    assert!((a / b - 1.0).abs() < 0.1, "{a} vs {b}");
}

#[test]
fn recovery_is_monotone_and_admissible() {
    let h_star = Vec3::new(1.0, 0.5, 0.3);
    let gamma = 1e-3;
    let prob = problem(h_star, gamma);
    let r = optimize(&prob).unwrap();
    let j_star = gamma * h_star.norm_sq() * 4.0 * PI * PI;
    let last = *r.j_history.last().unwrap();
    assert!(last <= j_star * 1.01, "{last} vs {j_star}");
    assert!(r.j_history.windows(2).all(|w| w[1] <= w[0]));
    assert!(r.log.iter().all(|l| l.h_l3 <= prob.c_h * (1.0 + 1e-12)));
    assert!(r.evaluations <= prob.options.max_state_solves);
    assert_eq!(r.log.len(), r.j_history.len());
}

#[test]
fn blow_up_is_infinite_cost() {
    let mut prob = problem(Vec3::new(1.0, 0.0, 0.0), 1e-3);
    prob.scheme.blowup_threshold = 1e-6;
    let mut rc = ReducedCost::new(&prob).unwrap();
    assert_eq!(rc.eval(&[0.1, 0.0, 0.0]).0, f64::INFINITY);
    assert!(matches!(optimize(&prob), Err(ControlError::Initial(_))));
}

#[test]
fn invalid_problems_are_rejected() {
    let mut prob = problem(Vec3::zero(), 1e-3);
    prob.gamma = 0.0;
    assert!(optimize(&prob).is_err());
    let mut prob = problem(Vec3::zero(), 1e-3);
    prob.theta0 = Some(vec![0.0; 2]);
    assert!(optimize(&prob).is_err());
}
