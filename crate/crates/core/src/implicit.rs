//! Newmark implicit track solver and static solver.
//!
//! Both serve as the reference track model of the co-simulation and as
//! oracles for the explicit integrator. Gap supports make the effective
//! matrix depend on which supports are closed; factorizations are cached per
//! status set.

use std::collections::HashMap;

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};

use crate::coupling::displacement_at;
use crate::error::{Error, Result};
use crate::explicit::{internal_force, Excitation, RunOutput, StateVector};
use crate::model::TrackModel;
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewmarkConfig {
    /// [s]
    pub dt: f64,
    pub gamma: f64,
    pub beta: f64,
    pub max_support_iterations: usize,
    /// Absolute equilibrium residual allowed after each solve [N], on top of
    /// a `1e-10` relative rounding allowance.
    pub residual_tolerance: f64,
}

impl NewmarkConfig {
    /// Constant average acceleration (gamma = 1/2, beta = 1/4).
    pub fn new(dt: f64) -> Self {
        NewmarkConfig {
            dt,
            gamma: 0.5,
            beta: 0.25,
            max_support_iterations: 20,
            residual_tolerance: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidArgument(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in (0, 0.5], got {}",
                self.beta
            )));
        }
        if self.max_support_iterations == 0 {
            return Err(Error::InvalidArgument(
                "support iteration cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn csr_mul_add(m: &CsrMatrix<f64>, x: &[f64], scale: f64, out: &mut [f64]) {
    for (i, row) in m.row_iter().enumerate() {
        let mut acc = 0.0;
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            acc += v * x[j];
        }
        out[i] += scale * acc;
    }
}

/// Support status key: one flag per gap support (linear ones are always closed).
type StatusKey = Vec<bool>;

struct LinearSystem {
    /// Entries shared by every status set.
    base: Vec<(usize, usize, f64)>,
    n: usize,
    cache: HashMap<StatusKey, CscCholesky<f64>>,
}

impl LinearSystem {
    fn new(n: usize, base: Vec<(usize, usize, f64)>) -> Self {
        LinearSystem {
            base,
            n,
            cache: HashMap::new(),
        }
    }

    /// Factorization with `support_diag[i]` added for every closed support.
    fn factor(&mut self, key: &StatusKey, support_diag: &[(usize, f64)]) -> Result<&CscCholesky<f64>> {
        if !self.cache.contains_key(key) {
            let mut coo = CooMatrix::new(self.n, self.n);
            for &(i, j, v) in &self.base {
                coo.push(i, j, v);
            }
            for &(i, v) in support_diag {
                coo.push(i, i, v);
            }
            let csc = CscMatrix::from(&coo);
            let chol = CscCholesky::factor(&csc)
                .map_err(|e| Error::Singular(format!("effective matrix is not positive definite ({e})")))?;
            self.cache.insert(key.clone(), chol);
        }
        Ok(&self.cache[key])
    }

    fn solve(chol: &CscCholesky<f64>, rhs: &[f64]) -> Vec<f64> {
        let b = DMatrix::from_column_slice(rhs.len(), 1, rhs);
        chol.solve(&b).as_slice().to_vec()
    }
}

fn gap_indices(model: &TrackModel) -> Vec<usize> {
    model
        .supports()
        .iter()
        .enumerate()
        .filter(|(_, s)| s.gap > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Newmark stepper bound to one model; owns the factorization cache.
pub struct NewmarkSolver<'m> {
    model: &'m TrackModel,
    config: NewmarkConfig,
    system: LinearSystem,
    gaps: Vec<usize>,
    status: StatusKey,
    steps: usize,
    rhs: Vec<f64>,
    tmp: Vec<f64>,
}

impl std::fmt::Debug for NewmarkSolver<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NewmarkSolver")
            .field("config", &self.config)
            .field("cached_factorizations", &self.system.cache.len())
            .field("steps", &self.steps)
            .finish()
    }
}

impl<'m> NewmarkSolver<'m> {
    pub fn new(model: &'m TrackModel, config: NewmarkConfig) -> Result<Self> {
        config.validate()?;
        let (a0, a1) = Self::coefficients(&config);
        let n = model.n_dofs();
        let mut base: Vec<(usize, usize, f64)> = model.stiffness().triplet_iter().map(|(i, j, v)| (i, j, *v)).collect();
        base.extend(model.damping().triplet_iter().map(|(i, j, v)| (i, j, a1 * v)));
        base.extend(model.lumped_mass().iter().enumerate().map(|(i, m)| (i, i, a0 * m)));
        let gaps = gap_indices(model);
        let status = vec![false; gaps.len()];
        Ok(NewmarkSolver {
            model,
            config,
            system: LinearSystem::new(n, base),
            gaps,
            status,
            steps: 0,
            rhs: vec![0.0; n],
            tmp: vec![0.0; n],
        })
    }

    fn coefficients(c: &NewmarkConfig) -> (f64, f64) {
        (1.0 / (c.beta * c.dt * c.dt), c.gamma / (c.beta * c.dt))
    }

    pub fn config(&self) -> &NewmarkConfig {
        &self.config
    }

    /// Number of distinct support status sets factorized so far.
    pub fn cached_factorizations(&self) -> usize {
        self.system.cache.len()
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Advances `state` to `t + dt` with `load` acting at the end of the step.
    /// Returns the number of support status iterations used.
    pub fn step(&mut self, state: &mut StateVector, load: &[f64]) -> Result<usize> {
        let c = self.config;
        let (a0, a1) = Self::coefficients(&c);
        let a2 = 1.0 / (c.beta * c.dt);
        let a3 = 1.0 / (2.0 * c.beta) - 1.0;
        let a4 = c.gamma / c.beta - 1.0;
        let a5 = 0.5 * c.dt * (c.gamma / c.beta - 2.0);
        let n = state.len();
        let model = self.model;

        // Predictor-type vectors shared by all status iterations.
        let mass_part: Vec<f64> = (0..n)
            .map(|i| a0 * state.x[i] + a2 * state.v[i] + a3 * state.a[i])
            .collect();
        let damp_part: Vec<f64> = (0..n)
            .map(|i| a1 * state.x[i] + a4 * state.v[i] + a5 * state.a[i])
            .collect();
        let mut base_rhs = load.to_vec();
        for (i, m) in model.lumped_mass().iter().enumerate() {
            base_rhs[i] += m * mass_part[i];
        }
        csr_mul_add(model.damping(), &damp_part, 1.0, &mut base_rhs);

        let step = self.steps;
        let mut status = self.status.clone();
        let mut iterations = 0;
        let x_new = loop {
            iterations += 1;
            let closed = self.closed_supports(&status);
            self.rhs.copy_from_slice(&base_rhs);
            let mut diag = Vec::with_capacity(closed.len());
            for &si in &closed {
                let s = model.supports()[si];
                self.rhs[s.dof] += s.stiffness * s.gap + s.damping * damp_part[s.dof];
                diag.push((s.dof, s.stiffness + a1 * s.damping));
            }
            let chol = self.system.factor(&status, &diag)?;
            let x = LinearSystem::solve(chol, &self.rhs);
            let next: StatusKey = self
                .gaps
                .iter()
                .map(|&si| model.supports()[si].is_closed(x[model.supports()[si].dof]))
                .collect();
            if next == status {
                self.check_residual(&x, &diag, step)?;
                break x;
            }
            if iterations >= c.max_support_iterations {
                return Err(Error::SupportIteration { step, iterations });
            }
            status = next;
        };
        self.status = status;

        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            let a_new = a0 * (x_new[i] - state.x[i]) - a2 * state.v[i] - a3 * state.a[i];
            state.v[i] += c.dt * ((1.0 - c.gamma) * state.a[i] + c.gamma * a_new);
            state.a[i] = a_new;
            state.x[i] = x_new[i];
        }
        state.t += c.dt;
        self.steps += 1;
        if !state.is_finite() {
            return Err(Error::Divergence { step });
        }
        Ok(iterations)
    }

    fn closed_supports(&self, status: &StatusKey) -> Vec<usize> {
        let mut gap_iter = status.iter();
        self.model
            .supports()
            .iter()
            .enumerate()
            .filter(|(_, s)| if s.gap > 0.0 { *gap_iter.next().unwrap() } else { true })
            .map(|(i, _)| i)
            .collect()
    }

    fn check_residual(&mut self, x: &[f64], diag: &[(usize, f64)], step: usize) -> Result<()> {
        self.tmp.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, v) in &self.system.base {
            self.tmp[i] += v * x[j];
        }
        for &(i, v) in diag {
            self.tmp[i] += v * x[i];
        }
        let scale = self.rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let worst = self
            .tmp
            .iter()
            .zip(&self.rhs)
            .fold(0.0f64, |a, (l, r)| a.max((l - r).abs()));
        if worst > self.config.residual_tolerance + 1e-10 * scale {
            return Err(Error::Singular(format!(
                "step {step}: equilibrium residual {worst:e} N"
            )));
        }
        Ok(())
    }
}

/// One Newmark step with a fresh solver.
pub fn newmark_step(
    state: &StateVector,
    model: &TrackModel,
    load: &[f64],
    config: &NewmarkConfig,
) -> Result<StateVector> {
    let mut next = state.clone();
    NewmarkSolver::new(model, *config)?.step(&mut next, load)?;
    Ok(next)
}

/// Acceleration consistent with `state` under `load`: `M^-1 (F - C v - K x)`.
pub fn consistent_acceleration(model: &TrackModel, state: &StateVector, load: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; state.len()];
    internal_force(model, &state.x, &state.v, &mut f);
    (0..state.len())
        .map(|i| (load[i] - f[i]) / model.lumped_mass()[i])
        .collect()
}

/// Static equilibrium `K x + supports = F`, gap status resolved by iteration.
pub fn static_solve(model: &TrackModel, load: &[f64]) -> Result<Vec<f64>> {
    let n = model.n_dofs();
    if load.len() != n {
        return Err(Error::InvalidArgument(format!(
            "load has {} entries, model {n} dofs",
            load.len()
        )));
    }
    let base: Vec<(usize, usize, f64)> = model.stiffness().triplet_iter().map(|(i, j, v)| (i, j, *v)).collect();
    let mut system = LinearSystem::new(n, base);
    let gaps = gap_indices(model);
    let mut status: StatusKey = vec![true; gaps.len()];
    const MAX_ITERATIONS: usize = 50;
    for _ in 0..MAX_ITERATIONS {
        let mut rhs = load.to_vec();
        let mut diag = Vec::new();
        let mut gap_iter = status.iter();
        for s in model.supports() {
            let closed = if s.gap > 0.0 { *gap_iter.next().unwrap() } else { true };
            if closed {
                rhs[s.dof] += s.stiffness * s.gap;
                diag.push((s.dof, s.stiffness));
            }
        }
        let chol = system.factor(&status, &diag)?;
        let x = LinearSystem::solve(chol, &rhs);

        let mut lhs = vec![0.0; n];
        for &(i, j, v) in &system.base {
            lhs[i] += v * x[j];
        }
        for &(i, v) in &diag {
            lhs[i] += v * x[i];
        }
        let scale = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let worst = lhs.iter().zip(&rhs).fold(0.0f64, |a, (l, r)| a.max((l - r).abs()));
        if worst > 1e-10 * scale.max(f64::MIN_POSITIVE) && scale > 0.0 {
            return Err(Error::Singular(format!(
                "static residual {worst:e} exceeds 1e-10 relative"
            )));
        }

        let next: StatusKey = gaps
            .iter()
            .map(|&si| model.supports()[si].is_closed(x[model.supports()[si].dof]))
            .collect();
        if next == status {
            return Ok(x);
        }
        status = next;
    }
    Err(Error::SupportIteration {
        step: 0,
        iterations: MAX_ITERATIONS,
    })
}

/// Newmark counterpart of [`crate::explicit::run`]: integrates from rest and
/// records at the start of every `output_stride`-th step. The load of a step
/// is sampled at its end, as the scheme requires.
pub fn run(
    model: &TrackModel,
    excitation: &mut dyn Excitation,
    config: &NewmarkConfig,
    n_steps: usize,
    output_stride: usize,
    probes: &[usize],
) -> Result<RunOutput> {
    if output_stride == 0 {
        return Err(Error::InvalidArgument("output stride must be at least 1".into()));
    }
    let mut solver = NewmarkSolver::new(model, *config)?;
    let n = model.n_dofs();
    let mut state = StateVector::zeros(n);
    let mut trace = Trace::new(probes.iter().map(|d| format!("dof_{d}")).collect());
    let mut load = vec![0.0; n];
    let mut probe_values = vec![0.0; probes.len()];

    let point = excitation.load(model, 0.0, &mut load)?;
    state.a = consistent_acceleration(model, &state, &load);
    let mut point_now = point;
    for k in 0..n_steps {
        let t = k as f64 * config.dt;
        state.t = t;
        if k % output_stride == 0 {
            for (v, &d) in probe_values.iter_mut().zip(probes) {
                *v = model.dof_value(&state.x, d);
            }
            let (s, force, u) = match point_now {
                Some(p) => (p.s, p.force, displacement_at(model, &state.x, p.s)?),
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            trace.push(t, s, force, u, &probe_values);
        }
        load.iter_mut().for_each(|f| *f = 0.0);
        point_now = excitation.load(model, (k + 1) as f64 * config.dt, &mut load)?;
        solver.step(&mut state, &load)?;
    }
    state.t = n_steps as f64 * config.dt;
    Ok(RunOutput { state, trace })
}
