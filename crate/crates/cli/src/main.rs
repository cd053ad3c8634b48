//! `vti`: run co-simulation scenarios, compare traces, sweep mass scaling
//! and inspect time-step limits of track models.

// Units in help texts are written in brackets, `[s]`; they are not links.
#![allow(rustdoc::broken_intra_doc_links)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vti_core::coupling::{Approach, CoSimRun, TransportKind};
use vti_core::demo::{write_demo_assets, DemoDip, DemoScenario, DemoTrack};
use vti_core::metrics::{compare_traces, median_force, sweep_mass_scaling, PeakOptions, SweepSetup};
use vti_core::model::{load_model_dir, TrackModel};
use vti_core::scenario::Scenario;
use vti_core::timestep::{mass_scale, MassScaling, ScalingScope, DEFAULT_CFL};
use vti_core::trace::Trace;
use vti_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "vti",
    version,
    about = "Vehicle/track interaction: standard vs. embedded explicit co-simulation"
)]
struct Cli {
    /// Run sweep members one after another instead of concurrently.
    #[arg(long, global = true)]
    serial: bool,

    /// Increase log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its trace.
    Run(RunArgs),
    /// Compare a trace against a reference trace.
    Compare(CompareArgs),
    /// Mass-scaling sweep of the new approach against the standard reference.
    Sweep(SweepArgs),
    /// Stable time step and mass-scaling report of a model (no dynamics).
    Analyze(AnalyzeArgs),
    /// Generate the demo model, profile and scenario files.
    Demo(DemoArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `run.output` of the scenario, then `out`.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Override `run.approach` (standard | new).
    #[arg(long)]
    approach: Option<String>,
    /// Override `run.transport` (in_process | file_exchange).
    #[arg(long)]
    transport: Option<String>,
    /// Override `run.m_c`.
    #[arg(long = "m-c", alias = "mc")]
    m_c: Option<f64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Candidate trace CSV.
    trace: PathBuf,
    /// Reference trace CSV.
    reference: PathBuf,
    /// Write comparison.csv and peaks.csv here.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Static wheel load W [N]; defaults to the median reference force.
    #[arg(long)]
    static_load: Option<f64>,
    /// Peak threshold [N]; defaults to 1.2 W.
    #[arg(long)]
    threshold: Option<f64>,
    /// Minimum peak separation [s].
    #[arg(long, default_value_t = 5e-3)]
    window: f64,
    /// Wall-clock of the reference run [s], for the CPU ratio.
    #[arg(long, requires = "cpu_candidate")]
    cpu_reference: Option<f64>,
    /// Wall-clock of the candidate run [s].
    #[arg(long, requires = "cpu_reference")]
    cpu_candidate: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Scenario configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated caps; defaults to `sweep.m_c` of the scenario.
    #[arg(long = "m-c", alias = "mc", value_delimiter = ',')]
    m_c: Vec<f64>,
    /// Output directory; defaults to `run.output` of the scenario, then `out`.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Directory holding the model files.
    #[arg(long)]
    model: PathBuf,
    /// Mass-scaling cap per dof [kg, or kg m^2 on rotations].
    #[arg(long = "mc", alias = "m-c", default_value_t = 0.0)]
    m_c: f64,
    /// CFL constant of the step estimate.
    #[arg(long, default_value_t = DEFAULT_CFL)]
    cfl: f64,
    /// Requested time step [s].
    #[arg(long)]
    target_dt: Option<f64>,
    /// Only add mass to translational dofs.
    #[arg(long)]
    translation_only: bool,
    /// Output directory for mass_scaling.csv and mass_scaling_summary.csv.
    #[arg(long, default_value = "out")]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct DemoArgs {
    /// Target directory.
    #[arg(long)]
    output: PathBuf,
    /// Split this element to insert one 20 times shorter.
    #[arg(long)]
    short_element: Option<usize>,
    /// Relative random spread of the support stiffness.
    #[arg(long, default_value_t = 0.0)]
    support_jitter: f64,
    /// Seed of the support-stiffness spread.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Why a command failed; each kind maps to its own exit code.
#[derive(Debug)]
enum Failure {
    Core(Error),
    /// A result violated an expected property (for instance a sweep whose
    /// time step does not grow with the cap).
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) => match e {
                Error::Config(_) => 3,
                Error::Io { .. } => 4,
                Error::Parse { .. }
                | Error::IndexOutOfRange { .. }
                | Error::InvalidModel(_)
                | Error::NonPhysicalMass { .. }
                | Error::SingularCondensation { .. }
                | Error::IndefiniteDiagonal { .. } => 5,
                Error::InvalidArgument(_)
                | Error::OutOfRange { .. }
                | Error::InfeasibleTimeStep { .. }
                | Error::DisjointTraces => 6,
                Error::Divergence { .. } | Error::SupportIteration { .. } | Error::Singular(_) => 7,
                Error::Transport(_) => 8,
            },
            Failure::Check(_) => 9,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            3 => "configuration error",
            4 => "i/o error",
            5 => "model error",
            6 => "invalid request",
            7 => "numerical failure",
            8 => "transport failure",
            _ => "check failed",
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Check(m) => f.write_str(m),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

/// `println!` that ignores a closed stdout (for example when piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn write_file(dir: &Path, name: &str, contents: &str) -> vti_core::Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::Io { path, source: e })
}

fn create_dir(dir: &Path) -> vti_core::Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn output_dir(explicit: Option<PathBuf>, scenario: &Scenario) -> PathBuf {
    explicit
        .or_else(|| scenario.output.clone())
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn run_summary(run: &CoSimRun) -> String {
    let f_max = run.trace.f_contact.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let u_max = run.trace.u_wheel.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = String::new();
    let _ = writeln!(out, "scenario = {}", run.scenario);
    let _ = writeln!(out, "approach = {}", run.approach);
    let _ = writeln!(out, "transport = {}", run.transport);
    let _ = writeln!(out, "dt = {:e}", run.dt_track);
    let _ = writeln!(out, "n_steps = {}", run.n_steps);
    let _ = writeln!(out, "wall_clock = {:e}", run.timings.total);
    let _ = writeln!(out, "max_contact_force = {f_max:e}");
    let _ = writeln!(out, "max_displacement_under_wheel = {u_max:e}");
    if let Some(r) = &run.mass_scaling {
        let _ = writeln!(out, "base_dt = {:e}", r.base_dt);
        let _ = writeln!(out, "total_added_mass = {:e}", r.total_added_mass);
        let _ = writeln!(out, "total_added_inertia = {:e}", r.total_added_inertia);
    }
    out
}

fn cmd_run(args: RunArgs) -> Outcome {
    let mut scenario = Scenario::load(&args.config)?;
    if let Some(a) = &args.approach {
        scenario.approach = a.parse::<Approach>()?;
    }
    if let Some(t) = &args.transport {
        scenario.options.transport = t.parse::<TransportKind>()?;
    }
    if let Some(m_c) = args.m_c {
        if !(m_c.is_finite() && m_c >= 0.0) {
            return Err(Error::Config(format!("--m-c must be >= 0, got {m_c}")).into());
        }
        scenario.scaling.cap = m_c;
    }
    let out = output_dir(args.output, &scenario);
    let model = scenario.track_model()?;
    let profile = scenario.rail_profile()?;
    log::info!("running `{}` ({} approach)", scenario.name, scenario.approach);
    let run = scenario.run_on(&model, &profile)?;
    create_dir(&out)?;
    run.trace.write_csv(out.join("trace.csv"))?;
    write_file(&out, "timings.csv", &run.timings.to_csv())?;
    let summary = run_summary(&run);
    write_file(&out, "summary.txt", &summary)?;
    if let Some(report) = &run.mass_scaling {
        report.write(&out)?;
    }
    say!("{}", summary.trim_end());
    say!("output = {}", out.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Outcome {
    let trace = Trace::read_csv(&args.trace)?;
    let reference = Trace::read_csv(&args.reference)?;
    let w = match args.static_load {
        Some(w) => w,
        None => median_force(&reference)
            .ok_or_else(|| Error::InvalidArgument("reference trace has no contact force".into()))?,
    };
    let peaks = PeakOptions {
        threshold: args.threshold.unwrap_or(1.2 * w),
        window: args.window,
    };
    let timings = args.cpu_reference.zip(args.cpu_candidate);
    let m = compare_traces(&trace, &reference, &peaks, timings)?;
    say!("max_rel_disp_dev = {:.6} %", 100.0 * m.max_rel_disp_dev);
    match m.peak_amplitude_dev {
        Some(d) => say!("peak_amplitude_dev = {:.6} %", 100.0 * d),
        None => say!(
            "peak_amplitude_dev = n/a (no reference peaks above {:.1} N)",
            peaks.threshold
        ),
    }
    say!(
        "peaks = {} (reference {})",
        m.peak_forces.len(),
        m.reference_peaks.len()
    );
    if let Some(r) = m.cpu_ratio {
        say!("cpu_ratio = {r:.4}");
    }
    say!("dt_used = {:e}", m.dt_used);
    if let Some(out) = args.output {
        create_dir(&out)?;
        write_file(&out, "comparison.csv", &m.summary_csv())?;
        write_file(&out, "peaks.csv", &m.peaks_csv())?;
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs, serial: bool) -> Outcome {
    let scenario = Scenario::load(&args.config)?;
    let caps = if args.m_c.is_empty() {
        scenario.sweep_caps.clone()
    } else {
        args.m_c
    };
    if caps.is_empty() {
        return Err(Error::Config("no caps given (use --m-c or sweep.m_c)".into()).into());
    }
    if caps.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::Config("caps must be >= 0".into()).into());
    }
    let out = output_dir(args.output, &scenario);
    let model = scenario.track_model()?;
    let profile = scenario.rail_profile()?;
    log::info!("reference run (standard approach, dt = {:e} s)", scenario.options.dt);
    let reference = scenario.run_reference(&model, &profile)?;
    let setup = SweepSetup {
        vehicle: &scenario.vehicle,
        model: &model,
        profile: &profile,
        options: &scenario.options,
        scaling: scenario.scaling,
        peaks: scenario.peak_options(),
    };
    let table = sweep_mass_scaling(&setup, &reference, &caps, serial);
    create_dir(&out)?;
    reference.trace.write_csv(out.join("reference_trace.csv"))?;
    let csv = table.to_csv();
    write_file(&out, "sweep.csv", &csv)?;
    say!("{}", csv.trim_end());
    for row in &table.rows {
        if let Err(message) = &row.outcome {
            log::warn!("m_c = {}: {message}", row.m_c);
        }
    }
    if !table.deviation_nondecreasing() {
        log::warn!("displacement deviation does not grow monotonically with m_c");
    }
    if !table.dt_strictly_increasing() {
        return Err(Failure::Check("time step does not increase strictly with m_c".into()));
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Outcome {
    let raw = load_model_dir(&args.model)?;
    let model = TrackModel::build(&raw)?;
    let params = MassScaling {
        cap: args.m_c,
        target_dt: args.target_dt,
        cfl: args.cfl,
        scope: if args.translation_only {
            ScalingScope::TranslationOnly
        } else {
            ScalingScope::AllDofs
        },
    };
    let (_, report) = mass_scale(&model, &params)?;
    create_dir(&args.output)?;
    report.write(&args.output)?;
    say!(
        "dofs = {} retained, {} blocked",
        model.n_dofs(),
        model.blocked_dofs().len()
    );
    say!("base_dt = {:e}", report.base_dt);
    say!("achieved_dt = {:e}", report.achieved_dt);
    say!("total_added_mass = {:e}", report.total_added_mass);
    say!("total_added_inertia = {:e}", report.total_added_inertia);
    say!("limiting_dofs = {:?}", report.limiting_dofs);
    say!("report = {}", args.output.join("mass_scaling.csv").display());
    Ok(())
}

fn cmd_demo(args: DemoArgs) -> Outcome {
    let track = DemoTrack {
        short_element: args.short_element,
        support_jitter: args.support_jitter,
        seed: args.seed,
        ..Default::default()
    };
    write_demo_assets(&args.output, &track, &DemoDip::default(), &DemoScenario::default())?;
    say!("demo assets written to {}", args.output.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Sweep(a) => cmd_sweep(a, cli.serial),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Demo(a) => cmd_demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("vti: {}: {f}", f.kind());
            ExitCode::from(f.exit_code())
        }
    }
}
