mod common;

use common::*;
use vti_core::coupling::MovingLoad;
use vti_core::explicit::{mechanical_energy, StateVector};
use vti_core::implicit::{newmark_step, run, static_solve, NewmarkConfig, NewmarkSolver};
use vti_core::model::{SupportElement, TrackModel};
use vti_core::Error;

#[test]
fn zero_load_from_rest_stays_at_rest() {
    let model = demo();
    let state = StateVector::zeros(model.n_dofs());
    let next = newmark_step(&state, &model, &vec![0.0; model.n_dofs()], &NewmarkConfig::new(1e-4)).unwrap();
    assert!(next.x.iter().chain(&next.v).chain(&next.a).all(|&v| v == 0.0));
}

#[test]
fn undamped_step_response_period() {
    let model = single_dof(1.0, 1.0, 0.0);
    let dt = 0.01;
    let mut solver = NewmarkSolver::new(&model, NewmarkConfig::new(dt)).unwrap();
    let mut state = StateVector::zeros(1);
    state.a[0] = 1.0; // consistent with F = 1 at rest
    let mut xs = vec![0.0];
    for _ in 0..10_000 {
        solver.step(&mut state, &[1.0]).unwrap();
        xs.push(state.x[0]);
    }
    // Oscillation about 1.0 with amplitude 1.0.
    let (lo, hi) = xs.iter().fold((f64::MAX, f64::MIN), |(l, h), &x| (l.min(x), h.max(x)));
    assert!(lo.abs() < 1e-3 && (hi - 2.0).abs() < 1e-3, "{lo} {hi}");
    // Period from upward crossings of the mean, linearly interpolated.
    let mut crossings = Vec::new();
    for k in 1..xs.len() {
        let (a, b) = (xs[k - 1] - 1.0, xs[k] - 1.0);
        if a < 0.0 && b >= 0.0 {
            crossings.push((k as f64 - 1.0 + a / (a - b)) * dt);
        }
    }
    let periods = crossings.len() - 1;
    let period = (crossings[periods] - crossings[0]) / periods as f64;
    let err = (period - 2.0 * std::f64::consts::PI).abs() / (2.0 * std::f64::consts::PI);
    assert!(err <= 5e-3, "period {period}, error {err}");
}

#[test]
fn gap_flip_converges_within_three_iterations() {
    // Base spring 1e6 N/m plus a 1e7 N/m support behind a 1 mm gap. The load
    // ramps so the gap closes mid-run and the status flips inside a step.
    let support = SupportElement::new(0, 1e7, 0.0, 1e-3).unwrap();
    let model = gap_dof(1.0, 1e6, support);
    let mut solver = NewmarkSolver::new(&model, NewmarkConfig::new(1e-3)).unwrap();
    let mut state = StateVector::zeros(1);
    let mut worst = 0;
    let mut flips = 0;
    let mut closed = false;
    for k in 0..400 {
        let load = 1e6 * 2e-3 * (k as f64 / 200.0).min(1.0);
        worst = worst.max(solver.step(&mut state, &[load]).unwrap());
        if (state.x[0] >= 1e-3) != closed {
            closed = !closed;
            flips += 1;
        }
    }
    assert!(flips >= 1);
    assert!((2..=3).contains(&worst), "{worst}");
    assert_eq!(solver.cached_factorizations(), 2);
}

#[test]
fn static_examples() {
    let model = demo();
    let x = static_solve(&model, &vec![0.0; model.n_dofs()]).unwrap();
    assert!(x.iter().all(|&v| v == 0.0));

    let springs = TrackModel::build(&series_springs()).unwrap();
    assert_eq!(springs.n_dofs(), 1);
    let x = static_solve(&springs, &[1.0]).unwrap();
    assert!((x[0] - 1.0 / 1.2).abs() < 1e-12);
}

#[test]
fn static_zero_gap_equals_linear() {
    let linear = demo();
    let gapped = linear.with_support_gaps(&[48, 50], 0.0).unwrap();
    let mut load = vec![0.0; linear.n_dofs()];
    vti_core::coupling::apply_point_load(&linear, 1e5, 14.7, &mut load).unwrap();
    assert_eq!(
        static_solve(&linear, &load).unwrap(),
        static_solve(&gapped, &load).unwrap()
    );
}

#[test]
fn static_gap_resolution() {
    // Voided supports under a heavy load: some gaps close, the solution is
    // in equilibrium with the active support set.
    let model = demo().with_support_gaps(&[46, 48, 50, 52], 1e-3).unwrap();
    let mut load = vec![0.0; model.n_dofs()];
    vti_core::coupling::apply_point_load(&model, 3e5, 14.7, &mut load).unwrap();
    let x = static_solve(&model, &load).unwrap();
    let mut f = vec![0.0; model.n_dofs()];
    vti_core::explicit::internal_force(&model, &x, &vec![0.0; model.n_dofs()], &mut f);
    assert!(rel_diff(&f, &load) < 1e-9);
    let w = |d: usize| model.dof_value(&x, d);
    assert!(w(48) > 1e-3 || w(50) > 1e-3, "expected a closed gap");
}

#[test]
fn unconditionally_stable_at_large_steps() {
    let model = demo();
    let dt = 100.0 * model.stable_timestep(1.0).unwrap();
    let mut solver = NewmarkSolver::new(&model, NewmarkConfig::new(dt)).unwrap();
    let mut state = StateVector::zeros(model.n_dofs());
    state.x = random_vec(&mut rng(11), model.n_dofs(), 1e-4);
    let zero = vec![0.0; model.n_dofs()];
    let e0 = mechanical_energy(&model, &state);
    for _ in 0..2_000 {
        solver.step(&mut state, &zero).unwrap();
        assert!(mechanical_energy(&model, &state) <= e0 * (1.0 + 1e-9));
    }
}

#[test]
fn run_records_the_moving_load() {
    let model = demo();
    let mut load = MovingLoad {
        force: 1e5,
        s_start: 6.0,
        speed: 30.0,
    };
    let out = run(&model, &mut load, &NewmarkConfig::new(1e-4), 100, 10, &[24]).unwrap();
    assert_eq!(out.trace.len(), 10);
    assert!((out.trace.s_wheel[9] - (6.0 + 30.0 * 9e-3)).abs() < 1e-12);
    assert!(out.trace.u_wheel[9] > 0.0);
    assert!(matches!(
        run(&model, &mut load, &NewmarkConfig::new(1e-4), 10, 0, &[]),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn invalid_configs_rejected() {
    let model = single_dof(1.0, 1.0, 0.0);
    for config in [
        NewmarkConfig::new(0.0),
        NewmarkConfig {
            gamma: 1.5,
            ..NewmarkConfig::new(0.1)
        },
        NewmarkConfig {
            beta: 0.0,
            ..NewmarkConfig::new(0.1)
        },
        NewmarkConfig {
            max_support_iterations: 0,
            ..NewmarkConfig::new(0.1)
        },
    ] {
        assert!(NewmarkSolver::new(&model, config).is_err());
    }
}
