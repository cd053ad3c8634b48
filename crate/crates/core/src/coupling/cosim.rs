//! Co-simulation drivers.
//!
//! Both approaches share one staggered loop. At step `n` the vehicle reads
//! the rail deflection `u_n` under the wheel, evaluates the contact force
//! `F_n`, and advances; the track then advances under `F_n` applied at the
//! old wheel position and reports `u_{n+1}` at the new one.
//!
//! * standard: the track is the Newmark solver, reached through a transport
//!   (direct call or file exchange), at the vehicle's time step.
//! * new: the track is the explicit solver on the mass-scaled model, called
//!   directly inside the vehicle loop at the explicit time step.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use super::hermite::{apply_point_load, displacement_at};
use super::profile::RailProfile;
use super::transport::{Channel, ExchangeDir, Received};
use super::vehicle::{contact_force, vehicle_step, VehicleModel, VehicleState};
use crate::error::{Error, Result};
use crate::explicit::{ExplicitConfig, ExplicitIntegrator, StateVector};
use crate::implicit::{consistent_acceleration, static_solve, NewmarkConfig, NewmarkSolver};
use crate::model::TrackModel;
use crate::timestep::{mass_scale, MassScaling, MassScalingReport};
use crate::trace::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Approach {
    Standard,
    New,
}

impl fmt::Display for Approach {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Approach::Standard => "standard",
            Approach::New => "new",
        })
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Approach::Standard),
            "new" => Ok(Approach::New),
            other => Err(Error::Config(format!(
                "unknown approach `{other}` (expected standard or new)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransportKind {
    #[default]
    InProcess,
    FileExchange,
}

impl fmt::Display for TransportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportKind::InProcess => "in_process",
            TransportKind::FileExchange => "file_exchange",
        })
    }
}

impl FromStr for TransportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "in_process" => Ok(TransportKind::InProcess),
            "file_exchange" => Ok(TransportKind::FileExchange),
            other => Err(Error::Config(format!(
                "unknown transport `{other}` (expected in_process or file_exchange)"
            ))),
        }
    }
}

/// Wall-clock time spent in each phase of the time loop [s].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub total: f64,
    pub vehicle: f64,
    pub track: f64,
    /// Time spent moving data between the two sides.
    pub exchange: f64,
}

impl Timings {
    pub fn to_csv(&self) -> String {
        format!(
            "total,vehicle,track,exchange\n{:e},{:e},{:e},{:e}\n",
            self.total, self.vehicle, self.track, self.exchange
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoSimOptions {
    pub scenario: String,
    /// Simulated duration [s].
    pub t_end: f64,
    /// Initial wheel position [m].
    pub s_start: f64,
    /// Shared step of the standard approach [s]. The new approach uses the
    /// stable step of the mass-scaled model instead.
    pub dt: f64,
    pub transport: TransportKind,
    /// Scratch directory of the file exchange; a fresh temporary directory
    /// is used when absent.
    pub exchange_dir: Option<PathBuf>,
    pub exchange_timeout: Duration,
    pub output_stride: usize,
    /// Start from the static deflection under the wheel load instead of an
    /// undeformed track.
    pub preload: bool,
}

impl Default for CoSimOptions {
    fn default() -> Self {
        CoSimOptions {
            scenario: "scenario".into(),
            t_end: 0.5,
            s_start: 0.0,
            dt: 5e-5,
            transport: TransportKind::InProcess,
            exchange_dir: None,
            exchange_timeout: Duration::from_secs(30),
            output_stride: 1,
            preload: true,
        }
    }
}

/// Result of one co-simulation.
#[derive(Debug, Clone)]
pub struct CoSimRun {
    pub scenario: String,
    pub approach: Approach,
    pub transport: TransportKind,
    pub dt_vehicle: f64,
    pub dt_track: f64,
    pub n_steps: usize,
    pub trace: Trace,
    pub timings: Timings,
    /// Present for the new approach.
    pub mass_scaling: Option<MassScalingReport>,
}

/// Track side of the staggered loop.
trait TrackSide {
    /// Advances one step under `force` at `s_load`; returns the deflection at `s_next`.
    fn advance(&mut self, step: usize, force: f64, s_load: f64, s_next: f64) -> Result<f64>;
}

struct ImplicitTrack<'m> {
    model: &'m TrackModel,
    solver: NewmarkSolver<'m>,
    state: StateVector,
    load: Vec<f64>,
    busy: Duration,
}

impl<'m> ImplicitTrack<'m> {
    fn new(model: &'m TrackModel, dt: f64, mut state: StateVector, initial_load: &[f64]) -> Result<Self> {
        state.a = consistent_acceleration(model, &state, initial_load);
        Ok(ImplicitTrack {
            model,
            solver: NewmarkSolver::new(model, NewmarkConfig::new(dt))?,
            state,
            load: vec![0.0; model.n_dofs()],
            busy: Duration::ZERO,
        })
    }
}

impl TrackSide for ImplicitTrack<'_> {
    fn advance(&mut self, _step: usize, force: f64, s_load: f64, s_next: f64) -> Result<f64> {
        let start = Instant::now();
        self.load.iter_mut().for_each(|f| *f = 0.0);
        apply_point_load(self.model, force, s_load, &mut self.load)?;
        self.solver.step(&mut self.state, &self.load)?;
        let u = displacement_at(self.model, &self.state.x, s_next);
        self.busy += start.elapsed();
        u
    }
}

struct ExplicitTrack<'m> {
    model: &'m TrackModel,
    integrator: ExplicitIntegrator<'m>,
    state: StateVector,
    load: Vec<f64>,
}

impl TrackSide for ExplicitTrack<'_> {
    fn advance(&mut self, _step: usize, force: f64, s_load: f64, s_next: f64) -> Result<f64> {
        self.load.iter_mut().for_each(|f| *f = 0.0);
        apply_point_load(self.model, force, s_load, &mut self.load)?;
        self.integrator.step(&mut self.state, &self.load)?;
        displacement_at(self.model, &self.state.x, s_next)
    }
}

struct FileClient<'a> {
    exchange: &'a ExchangeDir,
}

impl TrackSide for FileClient<'_> {
    fn advance(&mut self, step: usize, force: f64, _: f64, _: f64) -> Result<f64> {
        self.exchange.send(Channel::Force, step, force)?;
        match self.exchange.receive(Channel::Displacement, step)? {
            Received::Value(u) => Ok(u),
            Received::Stopped => Err(Error::Transport("track side stopped unexpectedly".into())),
        }
    }
}

fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!("end time must be >= 0, got {t_end}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    Ok((t_end / dt).round() as usize)
}

fn check_travel(
    vehicle: &VehicleModel,
    model: &TrackModel,
    opts: &CoSimOptions,
    dt: f64,
    n_steps: usize,
) -> Result<()> {
    let rail = model.rail_line();
    if rail.is_empty() {
        return Err(Error::InvalidModel("the track has no rail elements".into()));
    }
    let s_end = opts.s_start + vehicle.speed * dt * n_steps as f64;
    for s in [opts.s_start, s_end] {
        if s < rail.s_min() || s > rail.s_max() {
            return Err(Error::OutOfRange {
                s,
                min: rail.s_min(),
                max: rail.s_max(),
            });
        }
    }
    Ok(())
}

/// Initial track state, load vector and vehicle state.
fn initial_conditions(
    vehicle: &VehicleModel,
    model: &TrackModel,
    profile: &RailProfile,
    opts: &CoSimOptions,
) -> Result<(StateVector, Vec<f64>, VehicleState, f64)> {
    let n = model.n_dofs();
    let mut state = StateVector::zeros(n);
    let mut load = vec![0.0; n];
    if opts.preload {
        apply_point_load(model, vehicle.static_load(), opts.s_start, &mut load)?;
        state.x = static_solve(model, &load)?;
    }
    let u0 = displacement_at(model, &state.x, opts.s_start)?;
    let wheel = vehicle.initial_state(opts.s_start, u0 + profile.eval(opts.s_start));
    Ok((state, load, wheel, u0))
}

/// The shared vehicle loop; returns the trace and the time spent in the vehicle.
#[allow(clippy::too_many_arguments)]
fn coupled_loop(
    vehicle: &VehicleModel,
    profile: &RailProfile,
    track: &mut dyn TrackSide,
    mut wheel: VehicleState,
    mut u: f64,
    dt: f64,
    n_steps: usize,
    stride: usize,
) -> Result<(Trace, Duration, Duration)> {
    let mut trace = Trace::new(Vec::new());
    let mut in_vehicle = Duration::ZERO;
    let mut in_track = Duration::ZERO;
    for n in 0..n_steps {
        let start = Instant::now();
        let force = contact_force(wheel.z_w, u, profile.eval(wheel.s), vehicle.hertz_constant);
        if n % stride == 0 {
            trace.push(n as f64 * dt, wheel.s, force, u, &[]);
        }
        let s_load = wheel.s;
        wheel = vehicle_step(vehicle, &wheel, force, dt).map_err(|e| match e {
            Error::Divergence { .. } => Error::Divergence { step: n },
            other => other,
        })?;
        let mid = Instant::now();
        in_vehicle += mid - start;
        u = track.advance(n, force, s_load, wheel.s)?;
        in_track += mid.elapsed();
    }
    Ok((trace, in_vehicle, in_track))
}

fn validate(vehicle: &VehicleModel, opts: &CoSimOptions) -> Result<()> {
    vehicle.validate()?;
    if opts.output_stride == 0 {
        return Err(Error::InvalidArgument("output stride must be at least 1".into()));
    }
    Ok(())
}

/// Standard approach: Newmark track solver behind a transport, one shared step.
pub fn run_standard(
    vehicle: &VehicleModel,
    model: &TrackModel,
    profile: &RailProfile,
    opts: &CoSimOptions,
) -> Result<CoSimRun> {
    validate(vehicle, opts)?;
    let dt = opts.dt;
    let n_steps = step_count(opts.t_end, dt)?;
    check_travel(vehicle, model, opts, dt, n_steps)?;
    let (state, load, wheel, u0) = initial_conditions(vehicle, model, profile, opts)?;
    let mut track = ImplicitTrack::new(model, dt, state, &load)?;

    let start = Instant::now();
    let (trace, in_vehicle, track_busy) = match opts.transport {
        TransportKind::InProcess => {
            let (trace, in_vehicle, _) =
                coupled_loop(vehicle, profile, &mut track, wheel, u0, dt, n_steps, opts.output_stride)?;
            (trace, in_vehicle, track.busy)
        }
        TransportKind::FileExchange => file_exchange_loop(vehicle, profile, track, wheel, u0, dt, n_steps, opts)?,
    };
    let total = start.elapsed().as_secs_f64();
    let (vehicle_s, track_s) = (in_vehicle.as_secs_f64(), track_busy.as_secs_f64());
    Ok(CoSimRun {
        scenario: opts.scenario.clone(),
        approach: Approach::Standard,
        transport: opts.transport,
        dt_vehicle: dt,
        dt_track: dt,
        n_steps,
        trace,
        timings: Timings {
            total,
            vehicle: vehicle_s,
            track: track_s,
            exchange: (total - vehicle_s - track_s).max(0.0),
        },
        mass_scaling: None,
    })
}

static EXCHANGE_COUNTER: AtomicUsize = AtomicUsize::new(0);

#[allow(clippy::too_many_arguments)]
fn file_exchange_loop(
    vehicle: &VehicleModel,
    profile: &RailProfile,
    mut track: ImplicitTrack<'_>,
    wheel: VehicleState,
    u0: f64,
    dt: f64,
    n_steps: usize,
    opts: &CoSimOptions,
) -> Result<(Trace, Duration, Duration)> {
    let (dir, owned) = match &opts.exchange_dir {
        Some(dir) => (dir.clone(), false),
        None => {
            let id = EXCHANGE_COUNTER.fetch_add(1, Ordering::Relaxed);
            (
                std::env::temp_dir().join(format!("vti-exchange-{}-{id}", std::process::id())),
                true,
            )
        }
    };
    let exchange = ExchangeDir::new(&dir, opts.exchange_timeout)?;
    exchange.clear();
    log::debug!("file exchange through {}", dir.display());
    let speed = vehicle.speed;
    let s_start = wheel.s;

    let outcome = std::thread::scope(|scope| {
        let server = scope.spawn(|| -> Result<Duration> {
            let mut s = s_start;
            for n in 0..n_steps {
                let force = match exchange.receive(Channel::Force, n)? {
                    Received::Value(f) => f,
                    Received::Stopped => break,
                };
                // Same accumulation as the vehicle so both sides agree bitwise on s.
                let s_next = s + speed * dt;
                let u = match track.advance(n, force, s, s_next) {
                    Ok(u) => u,
                    Err(e) => {
                        exchange.signal_error(&e.to_string());
                        return Err(e);
                    }
                };
                exchange.send(Channel::Displacement, n, u)?;
                s = s_next;
            }
            Ok(track.busy)
        });
        let mut client = FileClient { exchange: &exchange };
        let client_result = coupled_loop(
            vehicle,
            profile,
            &mut client,
            wheel,
            u0,
            dt,
            n_steps,
            opts.output_stride,
        );
        if client_result.is_err() {
            exchange.signal_stop();
        }
        let server_result = server
            .join()
            .unwrap_or_else(|_| Err(Error::Transport("track server panicked".into())));
        match (client_result, server_result) {
            (Ok((trace, in_vehicle, _)), Ok(busy)) => Ok((trace, in_vehicle, busy)),
            // A server failure is the root cause of the client's transport error.
            (_, Err(e)) => Err(e),
            (Err(e), Ok(_)) => Err(e),
        }
    });
    exchange.clear();
    if owned {
        let _ = std::fs::remove_dir(&dir);
    }
    outcome
}

/// New approach: explicit track solver on the mass-scaled model inside the
/// vehicle loop, at the achieved stable step.
pub fn run_new(
    vehicle: &VehicleModel,
    model: &TrackModel,
    profile: &RailProfile,
    scaling: &MassScaling,
    opts: &CoSimOptions,
) -> Result<CoSimRun> {
    validate(vehicle, opts)?;
    let (scaled, report) = mass_scale(model, scaling)?;
    let dt = report.achieved_dt;
    log::debug!("mass scaling: {}", report.summary_line().trim());
    let n_steps = step_count(opts.t_end, dt)?;
    check_travel(vehicle, &scaled, opts, dt, n_steps)?;
    let (state, _, wheel, u0) = initial_conditions(vehicle, &scaled, profile, opts)?;
    let config = ExplicitConfig {
        displacement_scale: 1.0,
        ..ExplicitConfig::new(dt, n_steps)
    };
    let mut track = ExplicitTrack {
        model: &scaled,
        integrator: ExplicitIntegrator::new(&scaled, config)?,
        state,
        load: vec![0.0; scaled.n_dofs()],
    };

    let start = Instant::now();
    let (trace, in_vehicle, in_track) =
        coupled_loop(vehicle, profile, &mut track, wheel, u0, dt, n_steps, opts.output_stride)?;
    let total = start.elapsed().as_secs_f64();
    Ok(CoSimRun {
        scenario: opts.scenario.clone(),
        approach: Approach::New,
        transport: TransportKind::InProcess,
        dt_vehicle: dt,
        dt_track: dt,
        n_steps,
        trace,
        timings: Timings {
            total,
            vehicle: in_vehicle.as_secs_f64(),
            track: in_track.as_secs_f64(),
            exchange: 0.0,
        },
        mass_scaling: Some(report),
    })
}
