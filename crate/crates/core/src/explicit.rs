//! Explicit track integrator with a lumped mass matrix.
//!
//! The right-hand side `F - C v - K x` is evaluated element by element;
//! element blocks only carry retained dofs, so blocked dofs never enter the
//! loop. Two Euler variants are available, see [`Scheme`].

use crate::error::{Error, Result};
use crate::model::TrackModel;
use crate::trace::Trace;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub a: Vec<f64>,
    pub t: f64,
}

impl StateVector {
    pub fn zeros(n: usize) -> Self {
        StateVector {
            x: vec![0.0; n],
            v: vec![0.0; n],
            a: vec![0.0; n],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.v).chain(&self.a).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// `a = M^-1 (F - f(x, v))`, then `v += dt a`, then `x += dt v`.
    #[default]
    SemiImplicit,
    /// Every update uses the previous step's quantities:
    /// `x += dt v_old`, `v += dt a_old`, `a = M^-1 (F_old - f(x_old, v_old))`.
    /// Forward Euler; unstable for undamped modes at any step.
    ForwardEuler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplicitConfig {
    /// [s]
    pub dt: f64,
    pub n_steps: usize,
    pub output_stride: usize,
    pub scheme: Scheme,
    /// Displacements beyond `1e6` times this value [m] count as divergence.
    pub displacement_scale: f64,
}

impl ExplicitConfig {
    pub fn new(dt: f64, n_steps: usize) -> Self {
        ExplicitConfig {
            dt,
            n_steps,
            output_stride: 1,
            scheme: Scheme::SemiImplicit,
            displacement_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidArgument("output stride must be at least 1".into()));
        }
        if !(self.displacement_scale > 0.0) {
            return Err(Error::InvalidArgument("displacement scale must be positive".into()));
        }
        Ok(())
    }
}

/// `C v + K x` plus support forces, accumulated element by element into `out`.
pub fn internal_force(model: &TrackModel, x: &[f64], v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|f| *f = 0.0);
    for block in model.blocks() {
        let n = block.dofs.len();
        for (p, &i) in block.dofs.iter().enumerate() {
            let k_row = &block.stiffness[p * n..(p + 1) * n];
            let c_row = &block.damping[p * n..(p + 1) * n];
            let mut acc = 0.0;
            for (q, &j) in block.dofs.iter().enumerate() {
                acc += k_row[q] * x[j] + c_row[q] * v[j];
            }
            out[i] += acc;
        }
    }
    for s in model.supports() {
        out[s.dof] += s.force(x[s.dof], v[s.dof]);
    }
}

/// Explicit time stepper bound to one model.
#[derive(Debug)]
pub struct ExplicitIntegrator<'m> {
    model: &'m TrackModel,
    config: ExplicitConfig,
    inv_mass: Vec<f64>,
    force: Vec<f64>,
    steps: usize,
}

impl<'m> ExplicitIntegrator<'m> {
    pub fn new(model: &'m TrackModel, config: ExplicitConfig) -> Result<Self> {
        config.validate()?;
        Ok(ExplicitIntegrator {
            model,
            config,
            inv_mass: model.lumped_mass().iter().map(|m| 1.0 / m).collect(),
            force: vec![0.0; model.n_dofs()],
            steps: 0,
        })
    }

    pub fn config(&self) -> &ExplicitConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Advances `state` by one step under the retained-dof load `load`,
    /// sampled at the start of the step.
    #[allow(clippy::needless_range_loop)]
    pub fn step(&mut self, state: &mut StateVector, load: &[f64]) -> Result<()> {
        let dt = self.config.dt;
        internal_force(self.model, &state.x, &state.v, &mut self.force);
        match self.config.scheme {
            Scheme::SemiImplicit => {
                for i in 0..state.x.len() {
                    let a = (load[i] - self.force[i]) * self.inv_mass[i];
                    state.a[i] = a;
                    state.v[i] += dt * a;
                    state.x[i] += dt * state.v[i];
                }
            }
            Scheme::ForwardEuler => {
                for i in 0..state.x.len() {
                    state.x[i] += dt * state.v[i];
                    state.v[i] += dt * state.a[i];
                    state.a[i] = (load[i] - self.force[i]) * self.inv_mass[i];
                }
            }
        }
        state.t += dt;
        let step = self.steps;
        self.steps += 1;
        self.check(state, step)
    }

    fn check(&self, state: &StateVector, step: usize) -> Result<()> {
        let limit = 1e6 * self.config.displacement_scale;
        let bad = state
            .x
            .iter()
            .zip(&state.v)
            .any(|(x, v)| !x.is_finite() || !v.is_finite() || x.abs() > limit);
        if bad {
            return Err(Error::Divergence { step });
        }
        Ok(())
    }
}

/// One step with a freshly built integrator; convenient for tests and small drivers.
pub fn step(state: &StateVector, model: &TrackModel, load: &[f64], config: &ExplicitConfig) -> Result<StateVector> {
    let mut next = state.clone();
    ExplicitIntegrator::new(model, *config)?.step(&mut next, load)?;
    Ok(next)
}

/// A point load on the rail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadPoint {
    /// [m]
    pub s: f64,
    /// [N], positive downward
    pub force: f64,
}

/// External loading of the track.
pub trait Excitation {
    /// Adds the load at time `t` to the zeroed retained-dof vector `out`.
    /// Returns the load point when the load is a single point load.
    fn load(&mut self, model: &TrackModel, t: f64, out: &mut [f64]) -> Result<Option<LoadPoint>>;
}

/// No external load.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unloaded;

impl Excitation for Unloaded {
    fn load(&mut self, _: &TrackModel, _: f64, _: &mut [f64]) -> Result<Option<LoadPoint>> {
        Ok(None)
    }
}

/// Load given as a closure over time, writing retained-dof values.
pub struct LoadFn<F>(pub F);

impl<F: FnMut(f64, &mut [f64])> Excitation for LoadFn<F> {
    fn load(&mut self, _: &TrackModel, t: f64, out: &mut [f64]) -> Result<Option<LoadPoint>> {
        (self.0)(t, out);
        Ok(None)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: StateVector,
    pub trace: Trace,
}

/// Integrates from rest. A trace row is recorded at the start of every
/// `output_stride`-th step; `probes` are original dof indices.
pub fn run(
    model: &TrackModel,
    excitation: &mut dyn Excitation,
    config: &ExplicitConfig,
    probes: &[usize],
) -> Result<RunOutput> {
    let mut integrator = ExplicitIntegrator::new(model, *config)?;
    let n = model.n_dofs();
    let mut state = StateVector::zeros(n);
    let mut trace = Trace::new(probes.iter().map(|d| format!("dof_{d}")).collect());
    let mut load = vec![0.0; n];
    let mut probe_values = vec![0.0; probes.len()];
    for k in 0..config.n_steps {
        let t = k as f64 * config.dt;
        state.t = t;
        load.iter_mut().for_each(|f| *f = 0.0);
        let point = excitation.load(model, t, &mut load)?;
        if k % config.output_stride == 0 {
            for (v, &d) in probe_values.iter_mut().zip(probes) {
                *v = model.dof_value(&state.x, d);
            }
            let (s, force, u) = match point {
                Some(p) => (p.s, p.force, crate::coupling::displacement_at(model, &state.x, p.s)?),
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            trace.push(t, s, force, u, &probe_values);
        }
        integrator.step(&mut state, &load)?;
    }
    if config.n_steps > 0 {
        state.t = config.n_steps as f64 * config.dt;
    }
    Ok(RunOutput { state, trace })
}

/// `1/2 v^T M v + 1/2 x^T K x`, linear supports included as springs.
pub fn mechanical_energy(model: &TrackModel, state: &StateVector) -> f64 {
    let kinetic: f64 = model
        .lumped_mass()
        .iter()
        .zip(&state.v)
        .map(|(m, v)| 0.5 * m * v * v)
        .sum();
    let mut strain = 0.0;
    for (i, j, k) in model.stiffness().triplet_iter() {
        strain += 0.5 * state.x[i] * k * state.x[j];
    }
    for s in model.supports() {
        if s.is_closed(state.x[s.dof]) {
            let w = state.x[s.dof] - s.gap;
            strain += 0.5 * s.stiffness * w * w;
        }
    }
    kinetic + strain
}
