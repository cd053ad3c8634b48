mod common;

use common::*;
use vti_core::coupling::MovingLoad;
use vti_core::explicit::{
    internal_force, mechanical_energy, run, step, ExplicitConfig, ExplicitIntegrator, LoadFn, Scheme, StateVector,
    Unloaded,
};
use vti_core::model::SupportElement;
use vti_core::timestep::DEFAULT_CFL;
use vti_core::Error;

#[test]
fn one_semi_implicit_step() {
    let model = single_dof(1.0, 1.0, 0.0);
    let mut state = StateVector::zeros(1);
    state.x[0] = 1.0;
    let next = step(&state, &model, &[0.0], &ExplicitConfig::new(0.1, 1)).unwrap();
    assert_eq!(next.a[0], -1.0);
    assert!((next.v[0] + 0.1).abs() < 1e-15);
    assert!((next.x[0] - 0.99).abs() < 1e-15);
    assert!((next.t - 0.1).abs() < 1e-15);
}

#[test]
fn one_forward_euler_step_uses_old_values() {
    let model = single_dof(1.0, 1.0, 0.0);
    let mut state = StateVector::zeros(1);
    state.x[0] = 1.0;
    let config = ExplicitConfig {
        scheme: Scheme::ForwardEuler,
        ..ExplicitConfig::new(0.1, 1)
    };
    let next = step(&state, &model, &[0.0], &config).unwrap();
    assert_eq!((next.x[0], next.v[0], next.a[0]), (1.0, 0.0, -1.0));
    let next = step(&next, &model, &[0.0], &config).unwrap();
    assert!((next.x[0] - 1.0).abs() < 1e-15);
    assert!((next.v[0] + 0.1).abs() < 1e-15);
}

#[test]
fn forward_euler_gains_energy_when_undamped() {
    let model = single_dof(1.0, 1.0, 0.0);
    let config = ExplicitConfig {
        scheme: Scheme::ForwardEuler,
        ..ExplicitConfig::new(0.01, 1)
    };
    let mut state = StateVector::zeros(1);
    state.x[0] = 1.0;
    let e0 = mechanical_energy(&model, &state);
    let mut integrator = ExplicitIntegrator::new(&model, config).unwrap();
    for _ in 0..10_000 {
        integrator.step(&mut state, &[0.0]).unwrap();
    }
    assert!(mechanical_energy(&model, &state) > 1.5 * e0);
}

#[test]
fn settles_to_static_limit() {
    let model = single_dof(1.0, 1.0, 0.5);
    let mut integrator = ExplicitIntegrator::new(&model, ExplicitConfig::new(0.1, 1)).unwrap();
    let mut state = StateVector::zeros(1);
    for _ in 0..2_000 {
        integrator.step(&mut state, &[1.0]).unwrap();
    }
    assert!((state.x[0] - 1.0).abs() < 1e-6, "{}", state.x[0]);
}

#[test]
fn diverges_beyond_the_stability_limit() {
    let model = single_dof(1.0, 1.0, 0.0);
    let dt = model.stable_timestep(DEFAULT_CFL).unwrap();
    let mut load = LoadFn(|t: f64, out: &mut [f64]| out[0] = if t == 0.0 { 1.0 } else { 0.0 });

    let stable = run(&model, &mut load, &ExplicitConfig::new(dt, 10_000), &[0]).unwrap();
    assert!(stable.state.x[0].abs() < 10.0);

    let err = run(&model, &mut load, &ExplicitConfig::new(2.5 * dt, 10_000), &[0]).unwrap_err();
    assert!(matches!(err, Error::Divergence { step } if step < 10_000), "{err}");
}

#[test]
fn empty_and_unloaded_runs() {
    let model = demo();
    let out = run(&model, &mut Unloaded, &ExplicitConfig::new(1e-5, 0), &[]).unwrap();
    assert!(out.trace.is_empty());
    assert!(out.state.x.iter().all(|&x| x == 0.0));

    let out = run(&model, &mut Unloaded, &ExplicitConfig::new(1e-5, 500), &[10, 11]).unwrap();
    assert_eq!(out.trace.len(), 500);
    assert!(out.state.x.iter().chain(&out.state.v).all(|&x| x == 0.0));
    assert!(out.trace.probes.iter().flatten().all(|&x| x == 0.0));
}

#[test]
fn element_loop_matches_dense_product() {
    let model = demo();
    let (k, c) = dense_kc(&model);
    let n = model.n_dofs();
    let mut rng = rng(7);
    let mut f = vec![0.0; n];
    for _ in 0..100 {
        let x = nalgebra::DVector::from_vec(random_vec(&mut rng, n, 1e-3));
        let v = nalgebra::DVector::from_vec(random_vec(&mut rng, n, 1e-1));
        internal_force(&model, x.as_slice(), v.as_slice(), &mut f);
        let dense = &k * &x + &c * &v;
        assert!(rel_diff(&f, dense.as_slice()) <= 1e-12);
    }
}

#[test]
fn support_force_examples() {
    let model = gap_dof(1.0, 0.0, SupportElement::new(0, 5e7, 0.0, 3e-3).unwrap());
    let mut f = [0.0];
    internal_force(&model, &[5e-3], &[0.0], &mut f);
    assert!((f[0] - 1e5).abs() < 1e-6);
    internal_force(&model, &[2e-3], &[0.0], &mut f);
    assert_eq!(f[0], 0.0);
    internal_force(&model, &[0.0], &[0.0], &mut f);
    assert_eq!(f[0], 0.0);
}

fn moving(force: f64) -> MovingLoad {
    MovingLoad {
        force,
        s_start: 6.0,
        speed: 30.0,
    }
}

#[test]
fn response_is_linear_in_the_load() {
    let model = demo();
    let dt = model.stable_timestep(1.0).unwrap();
    let config = ExplicitConfig::new(dt, 3_000);
    let a = run(&model, &mut moving(1e5), &config, &[40, 50]).unwrap();
    let b = run(&model, &mut moving(-2.5e5), &config, &[40, 50]).unwrap();
    let scaled: Vec<f64> = a.state.x.iter().map(|x| -2.5 * x).collect();
    assert!(rel_diff(&b.state.x, &scaled) <= 1e-10);
    for (pa, pb) in a.trace.probes.iter().zip(&b.trace.probes) {
        let scaled: Vec<f64> = pa.iter().map(|x| -2.5 * x).collect();
        assert!(rel_diff(pb, &scaled) <= 1e-10);
    }
}

#[test]
fn damped_free_vibration_loses_energy() {
    let model = demo();
    let dt = model.stable_timestep(1.0).unwrap();
    let mut integrator = ExplicitIntegrator::new(&model, ExplicitConfig::new(dt, 1)).unwrap();
    let mut state = StateVector::zeros(model.n_dofs());
    state.x = random_vec(&mut rng(3), model.n_dofs(), 1e-4);
    let zero = vec![0.0; model.n_dofs()];
    let n = 200;
    for _ in 0..n {
        integrator.step(&mut state, &zero).unwrap();
    }
    let e_n = mechanical_energy(&model, &state);
    for _ in n..10 * n {
        integrator.step(&mut state, &zero).unwrap();
    }
    assert!(mechanical_energy(&model, &state) < e_n);
}

#[test]
fn blocked_dofs_stay_zero() {
    let model = demo();
    let blocked = model.blocked_dofs();
    assert_eq!(blocked, vec![0, 1, 100, 101]);
    let dt = model.stable_timestep(1.0).unwrap();
    let config = ExplicitConfig {
        output_stride: 50,
        ..ExplicitConfig::new(dt, 2_000)
    };
    let out = run(&model, &mut moving(1e5), &config, &blocked).unwrap();
    assert!(out.trace.probes.iter().flatten().all(|&x| x == 0.0));
    let full = model.expand(&out.state.x);
    assert!(blocked.iter().all(|&d| full[d] == 0.0));
}

#[test]
fn zero_gap_supports_match_linear_ones_bitwise() {
    let raw = demo_raw();
    let mut gapped = raw.clone();
    for s in &mut gapped.supports {
        *s = SupportElement::new(s.dof, s.stiffness, s.damping, 0.0).unwrap();
    }
    let linear = vti_core::model::TrackModel::build(&raw).unwrap();
    let gapped = vti_core::model::TrackModel::build(&gapped).unwrap();
    let config = ExplicitConfig::new(linear.stable_timestep(1.0).unwrap(), 2_000);
    let a = run(&linear, &mut moving(1e5), &config, &[]).unwrap();
    let b = run(&gapped, &mut moving(1e5), &config, &[]).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.state, b.state);
}

#[test]
fn runs_are_bitwise_reproducible() {
    let model = demo();
    let config = ExplicitConfig::new(model.stable_timestep(1.0).unwrap(), 1_000);
    let a = run(&model, &mut moving(1e5), &config, &[50]).unwrap();
    let b = run(&model, &mut moving(1e5), &config, &[50]).unwrap();
    assert_eq!(a.trace.to_csv(), b.trace.to_csv());
}
