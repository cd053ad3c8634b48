//! Scenario configuration: a flat `key = value` text file.
//!
//! `#` starts a comment line. Relative paths are resolved against the
//! directory of the configuration file. Unknown or repeated keys are errors
//! so typos do not silently fall back to defaults.
//!
//! ```text
//! run.name = demo
//! track.model_dir = model
//! profile.file = model/profile.csv
//! run.approach = new
//! run.m_c = 1.0
//! run.t_end = 0.5
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::coupling::{
    run_new, run_standard, Approach, CoSimOptions, CoSimRun, RailProfile, Suspension, TransportKind, VehicleModel,
};
use crate::error::{Error, Result};
use crate::metrics::PeakOptions;
use crate::model::{load_model_dir, TrackModel};
use crate::timestep::{MassScaling, ScalingScope, DEFAULT_CFL};

/// Every key the parser accepts, with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("run.name", "scenario identifier"),
    ("run.approach", "standard | new"),
    ("run.transport", "in_process | file_exchange (standard approach)"),
    ("run.dt", "shared time step of the standard approach [s]"),
    ("run.t_end", "simulated duration [s]"),
    ("run.s_start", "initial wheel position [m]"),
    ("run.m_c", "mass-scaling cap per dof [kg or kg m^2] (new approach)"),
    ("run.target_dt", "requested explicit time step [s] (new approach)"),
    ("run.cfl", "CFL constant of the explicit step estimate"),
    ("run.scaling_scope", "all_dofs | translation_only"),
    ("run.output", "output directory"),
    ("run.output_stride", "record every n-th step"),
    ("run.preload", "start from the static deflection (true | false)"),
    ("run.exchange_dir", "scratch directory of the file exchange"),
    ("run.exchange_timeout", "file exchange timeout [s]"),
    ("vehicle.m_s", "sprung mass [kg]"),
    ("vehicle.m_w", "wheel mass [kg]"),
    ("vehicle.k_p", "suspension stiffness [N/m]"),
    ("vehicle.c_p", "suspension damping [N s/m]"),
    ("vehicle.c_h", "Hertz constant [N/m^1.5]"),
    ("vehicle.speed", "forward speed [m/s]"),
    ("vehicle.gravity", "gravitational acceleration [m/s^2]"),
    ("vehicle.suspension", "flexible | rigid"),
    ("track.model_dir", "directory with the model files"),
    (
        "track.voided_dofs",
        "comma-separated original dofs whose supports get a gap",
    ),
    ("track.void_gap", "gap of the voided supports [m]"),
    ("profile.file", "rail profile CSV (s,r); flat rail when absent"),
    ("sweep.m_c", "comma-separated caps of a mass-scaling sweep"),
    ("metrics.peak_threshold", "peak detection threshold [N]; default 1.2 W"),
    ("metrics.peak_window", "minimum peak separation [s]"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub approach: Approach,
    pub vehicle: VehicleModel,
    pub model_dir: PathBuf,
    pub voided_dofs: Vec<usize>,
    pub void_gap: f64,
    pub profile: Option<PathBuf>,
    pub scaling: MassScaling,
    pub options: CoSimOptions,
    pub output: Option<PathBuf>,
    pub sweep_caps: Vec<f64>,
    pub peak_threshold: Option<f64>,
    pub peak_window: f64,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_value(key, v))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got `{value}`"))),
    }
}

/// Splits the text into key/value pairs, rejecting unknown and repeated keys.
fn entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.iter().any(|(k, _)| *k == key) {
            return Err(Error::Config(format!("line {}: unknown key `{key}`", idx + 1)));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: key `{key}` given twice", idx + 1)));
        }
    }
    Ok(map)
}

impl Scenario {
    /// Parses configuration text; relative paths are joined to `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let map = entries(text)?;
        let get = |key: &str| map.get(key).map(String::as_str);
        let path = |key: &str| get(key).map(|v| base_dir.join(v));

        let mut vehicle = VehicleModel::default();
        for (key, field) in [
            ("vehicle.m_s", &mut vehicle.sprung_mass),
            ("vehicle.m_w", &mut vehicle.wheel_mass),
            ("vehicle.k_p", &mut vehicle.suspension_stiffness),
            ("vehicle.c_p", &mut vehicle.suspension_damping),
            ("vehicle.c_h", &mut vehicle.hertz_constant),
            ("vehicle.speed", &mut vehicle.speed),
            ("vehicle.gravity", &mut vehicle.gravity),
        ] {
            if let Some(v) = get(key) {
                *field = parse_value(key, v)?;
            }
        }
        if let Some(v) = get("vehicle.suspension") {
            vehicle.suspension = match v {
                "flexible" => Suspension::Flexible,
                "rigid" => Suspension::Rigid,
                other => return Err(Error::Config(format!("vehicle.suspension: unknown `{other}`"))),
            };
        }
        vehicle.validate().map_err(|e| Error::Config(e.to_string()))?;

        let mut scaling = MassScaling {
            cfl: DEFAULT_CFL,
            ..MassScaling::default()
        };
        if let Some(v) = get("run.m_c") {
            scaling.cap = parse_value("run.m_c", v)?;
        }
        if let Some(v) = get("run.target_dt") {
            scaling.target_dt = Some(parse_value("run.target_dt", v)?);
        }
        if let Some(v) = get("run.cfl") {
            scaling.cfl = parse_value("run.cfl", v)?;
        }
        if let Some(v) = get("run.scaling_scope") {
            scaling.scope = match v {
                "all_dofs" => ScalingScope::AllDofs,
                "translation_only" => ScalingScope::TranslationOnly,
                other => return Err(Error::Config(format!("run.scaling_scope: unknown `{other}`"))),
            };
        }

        let name = get("run.name").unwrap_or("scenario").to_string();
        let mut options = CoSimOptions {
            scenario: name.clone(),
            ..CoSimOptions::default()
        };
        if let Some(v) = get("run.dt") {
            options.dt = parse_value("run.dt", v)?;
        }
        if let Some(v) = get("run.t_end") {
            options.t_end = parse_value("run.t_end", v)?;
        }
        if let Some(v) = get("run.s_start") {
            options.s_start = parse_value("run.s_start", v)?;
        }
        if let Some(v) = get("run.transport") {
            options.transport = v.parse()?;
        }
        if let Some(v) = get("run.output_stride") {
            options.output_stride = parse_value("run.output_stride", v)?;
        }
        if let Some(v) = get("run.preload") {
            options.preload = parse_bool("run.preload", v)?;
        }
        if let Some(v) = get("run.exchange_timeout") {
            let secs: f64 = parse_value("run.exchange_timeout", v)?;
            options.exchange_timeout = Duration::try_from_secs_f64(secs)
                .map_err(|_| Error::Config(format!("run.exchange_timeout: invalid `{v}`")))?;
        }
        options.exchange_dir = path("run.exchange_dir");

        let scenario = Scenario {
            name,
            approach: get("run.approach").map_or(Ok(Approach::New), str::parse)?,
            vehicle,
            model_dir: path("track.model_dir").ok_or_else(|| Error::Config("track.model_dir is required".into()))?,
            voided_dofs: get("track.voided_dofs").map_or(Ok(Vec::new()), |v| parse_list("track.voided_dofs", v))?,
            void_gap: get("track.void_gap").map_or(Ok(0.0), |v| parse_value("track.void_gap", v))?,
            profile: path("profile.file"),
            scaling,
            options,
            output: path("run.output"),
            sweep_caps: get("sweep.m_c").map_or(Ok(Vec::new()), |v| parse_list("sweep.m_c", v))?,
            peak_threshold: get("metrics.peak_threshold")
                .map(|v| parse_value("metrics.peak_threshold", v))
                .transpose()?,
            peak_window: get("metrics.peak_window").map_or(Ok(5e-3), |v| parse_value("metrics.peak_window", v))?,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, base)
    }

    fn validate(&self) -> Result<()> {
        let o = &self.options;
        if !(o.dt.is_finite() && o.dt > 0.0) {
            return Err(Error::Config(format!("run.dt must be positive, got {}", o.dt)));
        }
        if !(o.t_end.is_finite() && o.t_end >= 0.0) {
            return Err(Error::Config(format!("run.t_end must be >= 0, got {}", o.t_end)));
        }
        if o.output_stride == 0 {
            return Err(Error::Config("run.output_stride must be at least 1".into()));
        }
        if !(self.scaling.cap.is_finite() && self.scaling.cap >= 0.0) {
            return Err(Error::Config(format!("run.m_c must be >= 0, got {}", self.scaling.cap)));
        }
        if !(self.scaling.cfl.is_finite() && self.scaling.cfl > 0.0) {
            return Err(Error::Config(format!(
                "run.cfl must be positive, got {}",
                self.scaling.cfl
            )));
        }
        if !(self.void_gap.is_finite() && self.void_gap >= 0.0) {
            return Err(Error::Config(format!(
                "track.void_gap must be >= 0, got {}",
                self.void_gap
            )));
        }
        if self.sweep_caps.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::Config("sweep.m_c entries must be >= 0".into()));
        }
        if !(self.peak_window.is_finite() && self.peak_window > 0.0) {
            return Err(Error::Config("metrics.peak_window must be positive".into()));
        }
        Ok(())
    }

    /// Loads and prepares the track, applying the configured support voids.
    pub fn track_model(&self) -> Result<TrackModel> {
        let raw = load_model_dir(&self.model_dir)?;
        let model = TrackModel::build(&raw)?;
        if self.voided_dofs.is_empty() {
            Ok(model)
        } else {
            model.with_support_gaps(&self.voided_dofs, self.void_gap)
        }
    }

    pub fn rail_profile(&self) -> Result<RailProfile> {
        match &self.profile {
            Some(p) => RailProfile::read_csv(p),
            None => Ok(RailProfile::flat()),
        }
    }

    pub fn peak_options(&self) -> PeakOptions {
        PeakOptions {
            threshold: self.peak_threshold.unwrap_or(1.2 * self.vehicle.static_load()),
            window: self.peak_window,
        }
    }

    /// Runs the configured approach on a prepared model.
    pub fn run_on(&self, model: &TrackModel, profile: &RailProfile) -> Result<CoSimRun> {
        match self.approach {
            Approach::Standard => run_standard(&self.vehicle, model, profile, &self.options),
            Approach::New => run_new(&self.vehicle, model, profile, &self.scaling, &self.options),
        }
    }

    /// The standard-approach reference of this scenario (in-process transport).
    pub fn run_reference(&self, model: &TrackModel, profile: &RailProfile) -> Result<CoSimRun> {
        let options = CoSimOptions {
            transport: TransportKind::InProcess,
            ..self.options.clone()
        };
        run_standard(&self.vehicle, model, profile, &options)
    }
}
