use std::f64::consts::PI;
use std::sync::Arc;

use nematic::energy::{elastic_energy, variational_derivative, QForm};
use nematic::fields::{random_smooth_field, Grid, SpectralCutoff, DirectorProjection};
use nematic::material::{build_params, MaterialInputs, MaterialParams};
use nematic::relative_energy::*;
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

fn grid(n: usize) -> Arc<Grid<f64>> {
    Grid::periodic(&[n, n], &[2.0 * PI, 2.0 * PI]).unwrap()
}

fn random_state(g: &Arc<Grid<f64>>, seed: u64, unit: bool) -> FieldState<f64> {
    let d = random_smooth_field(g, 2, 0.6, seed).map(|x| *x + Vec3::unit(2));
    let d = if unit { d.normalized() } else { d };
    FieldState::new(random_smooth_field(g, 2, 0.5, seed + 100), d, 0.0).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

#[test]
fn identical_arguments_vanish() {
    let p = params();
    let g = grid(16);
    let s = random_state(&g, 1, true);
    let h = random_smooth_field(&g, 1, 0.5, 7);
    let q = variational_derivative(&p, &s.d, &h, QForm::Tensor, None);
    assert_eq!(rel_energy(&s, &h, &s, &h, &p).unwrap(), 0.0);
    assert_eq!(rel_dissipation(&s, &q, &s, &q, &p).unwrap(), 0.0);
    assert_eq!(initial_distance(&s, &h, &s, &h, &p).unwrap(), 0.0);
    assert!(correction(&p, &s.d, &h, &s.d, &h).unwrap().linf_norm() == 0.0);
}

#[test]
fn constant_test_director_reduces_to_energy() {
    let p = params();
    let g = grid(16);
    let s = random_state(&g, 2, true);
    let zero = VectorField::zeros(&g);
    let test = FieldState::new(zero.clone(), VectorField::constant(&g, Vec3::new(0.0, 0.6, 0.8)), 0.0).unwrap();
    let e = rel_energy(&s, &zero, &test, &zero, &p).unwrap();
    let expect = 0.5 * s.v.l2_norm_sq() + elastic_energy(&p, &s.d);
    assert!(rel(e, expect) < 1e-12, "{e} vs {expect}");
    let d0 = initial_distance(&s, &zero, &test, &zero, &p).unwrap();
    assert!(rel(d0, e) < 1e-14);
}

#[test]
fn tensor_and_expanded_forms_agree() {
    let p = params();
    let g = grid(16);
    for seed in 0..5 {
        let a = random_state(&g, 10 + seed, false);
        let b = random_state(&g, 20 + seed, false);
        let h = random_smooth_field(&g, 1, 1.0, 30 + seed);
        let ht = random_smooth_field(&g, 1, 1.0, 40 + seed);
        let t = rel_energy_terms(&a, &h, &b, &ht, &p).unwrap();
        let x = rel_energy_expanded(&a, &h, &b, &ht, &p).unwrap();
        assert!(rel(t.total(), x) < 1e-10, "{} vs {x}", t.total());
        for term in [t.kinetic, t.lambda, t.theta, t.magnetic_par, t.magnetic_perp] {
            assert!(term >= 0.0);
        }
    }
}

#[test]
fn dissipation_reduction_and_sign() {
    let p = params();
    let g = grid(16);
    let s = random_state(&g, 3, true);
    let zero = VectorField::zeros(&g);
    let cfg = SchemeConfig::new(&g, 1e-3, 1e-3);
    let trace = integrate(&s, &p, &cfg).unwrap();
    let rates: f64 = trace.diagnostics[0].dissipation_rate.iter().sum();
    let q = variational_derivative(&p, &s.d, &zero, QForm::Tensor, None);
    let test = FieldState::new(zero.clone(), VectorField::constant(&g, Vec3::unit(2)), 0.0).unwrap();
    let w = rel_dissipation(&s, &q, &test, &zero, &p).unwrap();
    assert!(rel(w, rates) < 1e-12, "{w} vs {rates}");

    for seed in 0..5 {
        let a = random_state(&g, 50 + seed, false);
        let b = random_state(&g, 60 + seed, true);
        let qa = random_smooth_field(&g, 2, 1.0, 70 + seed);
        let qb = random_smooth_field(&g, 2, 1.0, 80 + seed);
        assert!(rel_dissipation(&a, &qa, &b, &qb, &p).unwrap() >= 0.0);
    }
}

#[test]
fn regularity_weight_examples() {
    let p = params();
    let g = grid(16);
    let zero = VectorField::zeros(&g);
    let eq = Equilibrium::new(Vec3::new(1.0, 1.0, 0.0)).unwrap();
    let s = eq.sample(&g, 0.3).unwrap();
    assert_eq!(regularity_weight(&p, &s, &zero, 5.0).unwrap(), 0.0);

    // Static twist: q̃ = (k₂ + 2k₄) d̃, so K = C (k₂ + 2k₄)² |Ω|^{2/3}.
    let twist = ClosedFormTrajectory::new(
        "twist",
        Arc::new(|_, _| Vec3::zero()),
        Arc::new(|_, x: [f64; 3]| Vec3::new(x[1].cos(), 0.0, x[1].sin())),
    );
    let s = twist.sample(&g, 0.0).unwrap();
    assert!(s.d_rate.linf_norm() < 1e-12);
    let c = 2.5;
    let k = regularity_weight(&p, &s, &zero, c).unwrap();
    let amp = p.k[1] + 2.0 * p.k[3];
    let expect = c * amp * amp * (4.0 * PI * PI).powf(2.0 / 3.0);
    assert!(rel(k, expect) < 1e-10, "{k} vs {expect}");
    let k2 = regularity_weight(&p, &s, &zero, 2.0 * c).unwrap();
    assert!(rel(k2, 2.0 * k) < 1e-15);
    assert!(regularity_weight(&p, &s, &zero, -1.0).is_err());
}

#[test]
fn initial_distance_is_nonnegative_for_unit_test_director() {
    let p = params();
    let g = grid(16);
    for seed in 0..8 {
        let a = random_state(&g, 90 + seed, false);
        let b = random_state(&g, 110 + seed, true);
        let h = random_smooth_field(&g, 1, 1.0, 130 + seed);
        let ht = random_smooth_field(&g, 1, 1.0, 140 + seed);
        let d0 = initial_distance(&a, &h, &b, &ht, &p).unwrap();
        assert!(d0 >= 0.0, "seed {seed}: {d0}");
    }
}

#[test]
fn equilibrium_residual_is_zero() {
    let p = params();
    let g = grid(12);
    let eq = Equilibrium::new(Vec3::unit(0)).unwrap();
    let s = eq.sample(&g, 0.0).unwrap();
    let zero = VectorField::zeros(&g);
    for variant in [PairingVariant::Continuous, PairingVariant::Discrete] {
        let cfg = SchemeConfig::new(&g, 1e-3, 1e-3);
        let r = equation_residual(&p, &s, &zero, None, variant, Some(&cfg)).unwrap();
        assert!(r.momentum.linf_norm() < 1e-14);
        assert!(r.director.linf_norm() < 1e-14);
    }
}

#[test]
fn manufactured_shear_flow() {
    // ṽ = sin(y) e^{−t} e₁ with d̃ = e₃: the Leslie stress reduces to μ₄ D,
    // so g = (μ₄/2 − 1) sin(y) e^{−t} e₁.
    let p = params();
    let g = grid(16);
    let traj = ClosedFormTrajectory::new(
        "shear",
        Arc::new(|t: f64, x: [f64; 3]| Vec3::new(x[1].sin() * (-t).exp(), 0.0, 0.0)),
        Arc::new(|_, _| Vec3::unit(2)),
    );
    let zero = VectorField::zeros(&g);
    let t = 0.4;
    let s = traj.sample(&g, t).unwrap();
    let force = manufactured_forcing(&p, &s, &zero).unwrap();
    let exact = VectorField::from_fn(&g, |x| Vec3::new((0.5 * p.mu[3] - 1.0) * x[1].sin() * (-t).exp(), 0.0, 0.0));
    assert!((&force - &exact).linf_norm() < 1e-10);
    let r = equation_residual(&p, &s, &zero, Some(&force), PairingVariant::Continuous, None).unwrap();
    assert!(r.momentum.linf_norm() < 1e-14);
    assert!(r.director.linf_norm() < 1e-14);
}

#[test]
fn non_unit_test_director_is_rejected() {
    let g = grid(8);
    let bad = ClosedFormTrajectory::new("bad", Arc::new(|_, _| Vec3::zero()), Arc::new(|_, _| Vec3::new(0.0, 0.0, 1.0 + 1e-8)));
    assert!(matches!(register_trajectory(&bad, &g, &[0.0, 1.0]), Err(RelativeEnergyError::NotUnit { .. })));
    let ok = ClosedFormTrajectory::new("ok", Arc::new(|_, _| Vec3::zero()), Arc::new(|t: f64, _| Vec3::new(t.cos(), t.sin(), 0.0)));
    assert!(register_trajectory(&ok, &g, &[0.0, 0.5, 1.0]).is_ok());
    assert!(Equilibrium::new(Vec3::<f64>::zero()).is_err());
}

fn perturbed_run(record_every: usize) -> (MaterialParams<f64>, SchemeConfig<f64>, nematic::SimulationTrace) {
    let p = params();
    let g = grid(16);
    let d = random_smooth_field(&g, 2, 0.4, 5).map(|x| *x + Vec3::unit(2)).normalized();
    let v = random_smooth_field(&g, 2, 0.3, 6);
    let mut cfg = SchemeConfig::new(&g, 2e-3, 0.1);
    cfg.record_every = record_every;
    let s = prepare_initial_state(&v, &d, &p, &cfg).unwrap();
    let trace = integrate(&s, &p, &cfg).unwrap();
    (p, cfg, trace)
}

#[test]
fn equilibrium_certificate_passes_and_is_refinement_stable() {
    let eq = Equilibrium::new(Vec3::unit(2)).unwrap();
    for every in [1, 5] {
        let (p, cfg, trace) = perturbed_run(every);
        let r = certificate(&trace, &p, &cfg, &eq, &CertificateOptions::default()).unwrap();
        assert!(r.pass, "record_every {every}: min slack {}", r.min_slack());
        assert_eq!(r.c, 0.0);
        assert_eq!(r.samples[0].field_gap, 0.0);
        assert!(r.samples.iter().all(|s| s.regularity < 1e-20 && s.pairing.abs() < 1e-20));
        assert!(rel(r.initial_distance, r.samples[0].rel_energy) < 1e-14);
        assert!(r.warnings.is_empty());
        // ½E(t) + ½∫W ≤ E(0) leaves at least half the initial energy as slack.
        let e0 = r.samples[0].rel_energy;
        assert!(r.slack.iter().skip(1).all(|&s| s > 0.4 * e0));

        let disc = CertificateOptions { variant: PairingVariant::Discrete, extra_terms: true, ..Default::default() };
        let rd = certificate(&trace, &p, &cfg, &eq, &disc).unwrap();
        assert!(rd.pass);
        assert!(rd.samples.iter().all(|s| s.extra == 0.0));
    }
}

#[test]
fn self_certification_has_zero_lhs() {
    let (p, cfg, trace) = perturbed_run(5);
    let tt = TraceTrajectory::from_trace(&trace, &p, &cfg).unwrap();
    for variant in [PairingVariant::Continuous, PairingVariant::Discrete] {
        let opts = CertificateOptions { variant, ..Default::default() };
        let r = certificate(&trace, &p, &cfg, &tt, &opts).unwrap();
        assert!(r.max_lhs() <= 1e-10, "{}", r.max_lhs());
        assert!(r.pass);
    }
}

#[test]
fn minimal_constant_contract() {
    // A static twist is not a solution, so the pairing term is active and a
    // positive constant may be needed.
    let (p, cfg, trace) = perturbed_run(2);
    let twist = ClosedFormTrajectory::new(
        "twist",
        Arc::new(|_, _| Vec3::zero()),
        Arc::new(|_, x: [f64; 3]| Vec3::new(x[1].cos(), 0.0, x[1].sin())),
    );
    let mut last = f64::INFINITY;
    for tol in [0.0, 1e-3, 1e-1, 10.0] {
        let opts = CertificateOptions { tol, ..Default::default() };
        let r = certificate(&trace, &p, &cfg, &twist, &opts).unwrap();
        assert!(r.c <= last);
        last = r.c;
        if r.c.is_finite() {
            assert!(r.pass);
            assert!(r.slack.iter().all(|&s| s >= -tol));
            if r.c > 0.0 {
                let lower = certificate(&trace, &p, &cfg, &twist, &CertificateOptions { c: Some(0.99 * r.c), ..opts }).unwrap();
                assert!(!lower.pass);
            }
        }
    }
}

#[test]
fn short_traces_warn() {
    let (p, cfg, trace) = perturbed_run(20);
    assert!(trace.len() < 8);
    let eq = Equilibrium::new(Vec3::unit(2)).unwrap();
    let r = certificate(&trace, &p, &cfg, &eq, &CertificateOptions::default()).unwrap();
    assert_eq!(r.warnings.len(), 1);
    let summary = r.summary();
    assert_eq!(summary.minimal_c, Some(0.0));
    assert!(summary.pass);
    assert_eq!(r.csv_rows().count(), trace.len());
}

#[test]
fn spectral_mode_extra_terms_are_finite() {
    let p = params();
    let g = grid(16);
    let d = random_smooth_field(&g, 3, 0.4, 8).map(|x| *x + Vec3::unit(2)).normalized();
    let mut cfg = SchemeConfig::new(&g, 2e-3, 0.02);
    cfg.director_projection = DirectorProjection::Spectral(SpectralCutoff::uniform(&g, 5).unwrap());
    let s = prepare_initial_state(&VectorField::zeros(&g), &d, &p, &cfg).unwrap();
    let trace = integrate(&s, &p, &cfg).unwrap();
    let twist = ClosedFormTrajectory::new(
        "rotating twist",
        Arc::new(|_, _| Vec3::zero()),
        Arc::new(|t: f64, x: [f64; 3]| Vec3::new((x[1] + t).cos(), 0.0, (x[1] + t).sin())),
    );
    let opts = CertificateOptions { variant: PairingVariant::Discrete, extra_terms: true, c: Some(1.0), ..Default::default() };
    let r = certificate(&trace, &p, &cfg, &twist, &opts).unwrap();
    assert!(r.samples.iter().all(|s| s.extra.is_finite()));
    assert!(r.samples.iter().any(|s| s.extra != 0.0));
}
