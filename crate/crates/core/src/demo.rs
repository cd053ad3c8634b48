//! Synthetic demo track: an Euler-Bernoulli rail on discrete spring-damper
//! supports, one support per node, plus a crossing-like dip profile.
//!
//! The defaults approximate a 60 kg/m rail on sleepers at 0.6 m. Node `i`
//! owns dofs `2i` (vertical, positive down) and `2i + 1` (rotation `dw/ds`).

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coupling::RailProfile;
use crate::error::{Error, Result};
use crate::model::{write_model_dir, ElementRecord, NodeRecord, RawModel, SupportElement, Triplet};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoTrack {
    pub n_elements: usize,
    /// Sleeper spacing [m].
    pub element_length: f64,
    /// [Pa]
    pub young_modulus: f64,
    /// Bending second moment of area [m^4].
    pub second_moment: f64,
    /// [kg/m]
    pub mass_per_length: f64,
    /// Pad and ballast in series, per sleeper [N/m].
    pub support_stiffness: f64,
    /// [N s/m]
    pub support_damping: f64,
    /// Stiffness-proportional rail damping coefficient [s]; `C = coefficient * K_rail`.
    pub rail_damping: f64,
    /// Block both dofs of the first and last node.
    pub clamp_ends: bool,
    /// Split this element so that a piece `element_length / short_ratio`
    /// long ends at its downstream node. The new node has no support.
    pub short_element: Option<usize>,
    pub short_ratio: f64,
    /// Relative random spread of the support stiffness, uniform in
    /// `[-jitter, jitter]`; zero gives identical supports.
    pub support_jitter: f64,
    /// Seed of the support-stiffness spread.
    pub seed: u64,
}

impl Default for DemoTrack {
    fn default() -> Self {
        DemoTrack {
            n_elements: 50,
            element_length: 0.6,
            young_modulus: 2.1e11,
            second_moment: 3.038e-5,
            mass_per_length: 60.21,
            support_stiffness: 5.0e7,
            support_damping: 5.0e4,
            rail_damping: 1.0e-6,
            clamp_ends: true,
            short_element: None,
            short_ratio: 20.0,
            support_jitter: 0.0,
            seed: 0,
        }
    }
}

/// Dip centre, depth and half length of the demo crossing [m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoDip {
    pub center: f64,
    pub depth: f64,
    pub half_length: f64,
}

impl Default for DemoDip {
    fn default() -> Self {
        DemoDip {
            center: 15.3,
            depth: 1.0e-3,
            half_length: 0.5,
        }
    }
}

impl DemoDip {
    pub fn profile(&self) -> Result<RailProfile> {
        RailProfile::dip(self.center, self.depth, self.half_length)
    }
}

/// Euler-Bernoulli stiffness over `(w_a, theta_a, w_b, theta_b)`.
pub fn beam_stiffness(ei: f64, l: f64) -> [[f64; 4]; 4] {
    let c = ei / (l * l * l);
    [
        [12.0 * c, 6.0 * l * c, -12.0 * c, 6.0 * l * c],
        [6.0 * l * c, 4.0 * l * l * c, -6.0 * l * c, 2.0 * l * l * c],
        [-12.0 * c, -6.0 * l * c, 12.0 * c, -6.0 * l * c],
        [6.0 * l * c, 2.0 * l * l * c, -6.0 * l * c, 4.0 * l * l * c],
    ]
}

/// Consistent beam mass over `(w_a, theta_a, w_b, theta_b)`.
pub fn beam_mass(rho_a: f64, l: f64) -> [[f64; 4]; 4] {
    let c = rho_a * l / 420.0;
    [
        [156.0 * c, 22.0 * l * c, 54.0 * c, -13.0 * l * c],
        [22.0 * l * c, 4.0 * l * l * c, 13.0 * l * c, -3.0 * l * l * c],
        [54.0 * c, 13.0 * l * c, 156.0 * c, -22.0 * l * c],
        [-13.0 * l * c, -3.0 * l * l * c, -22.0 * l * c, 4.0 * l * l * c],
    ]
}

impl DemoTrack {
    fn validate(&self) -> Result<()> {
        if self.n_elements == 0 {
            return Err(Error::InvalidArgument("demo track needs at least one element".into()));
        }
        let positive = [
            self.element_length,
            self.young_modulus,
            self.second_moment,
            self.mass_per_length,
            self.short_ratio,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(
                "demo track dimensions and properties must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.support_jitter) {
            return Err(Error::InvalidArgument("support jitter must lie in [0, 1)".into()));
        }
        if !(self.support_stiffness >= 0.0 && self.support_damping >= 0.0 && self.rail_damping >= 0.0) {
            return Err(Error::InvalidArgument(
                "demo support and damping values must be >= 0".into(),
            ));
        }
        if let Some(e) = self.short_element {
            if e >= self.n_elements || self.short_ratio <= 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "short element {e} needs an index below {} and a ratio above 1",
                    self.n_elements
                )));
            }
        }
        Ok(())
    }

    /// Node positions along the rail and whether each node sits on a sleeper.
    fn stations(&self) -> Vec<(f64, bool)> {
        let l = self.element_length;
        let mut out = vec![(0.0, true)];
        for e in 0..self.n_elements {
            let end = (e + 1) as f64 * l;
            if self.short_element == Some(e) {
                out.push((end - l / self.short_ratio, false));
            }
            out.push((end, true));
        }
        out
    }

    /// Arclength of sleeper (supported node) `k`.
    pub fn sleeper_position(&self, k: usize) -> f64 {
        k as f64 * self.element_length
    }

    /// Vertical dofs of `count` consecutive sleepers starting at sleeper `first`.
    pub fn sleeper_dofs(&self, first: usize, count: usize) -> Vec<usize> {
        self.stations()
            .iter()
            .enumerate()
            .filter(|(_, (_, sleeper))| *sleeper)
            .skip(first)
            .take(count)
            .map(|(node, _)| 2 * node)
            .collect()
    }

    /// Original dofs of the short element, empty without one.
    pub fn short_element_dofs(&self) -> Vec<usize> {
        match self.stations().iter().position(|(_, sleeper)| !sleeper) {
            Some(node) => vec![2 * node, 2 * node + 1, 2 * node + 2, 2 * node + 3],
            None => Vec::new(),
        }
    }

    pub fn build(&self) -> Result<RawModel> {
        self.validate()?;
        let stations = self.stations();
        let n_nodes = stations.len();
        let last = n_nodes - 1;
        let ei = self.young_modulus * self.second_moment;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut raw = RawModel {
            n_dofs: 2 * n_nodes,
            ..Default::default()
        };
        for (i, &(s, sleeper)) in stations.iter().enumerate() {
            let clamped = self.clamp_ends && (i == 0 || i == last);
            raw.nodes.push(NodeRecord {
                id: i,
                s,
                dof_w: Some(2 * i),
                dof_theta: Some(2 * i + 1),
                blocked_w: clamped,
                blocked_theta: clamped,
            });
            if sleeper {
                let spread = if self.support_jitter > 0.0 {
                    1.0 + self.support_jitter * rng.random_range(-1.0..=1.0)
                } else {
                    1.0
                };
                raw.supports.push(SupportElement::new(
                    2 * i,
                    spread * self.support_stiffness,
                    self.support_damping,
                    0.0,
                )?);
            }
        }
        for e in 0..last {
            raw.elements.push(ElementRecord {
                id: e,
                node_a: e,
                node_b: e + 1,
            });
            let l = stations[e + 1].0 - stations[e].0;
            let k = beam_stiffness(ei, l);
            let m = beam_mass(self.mass_per_length, l);
            let dofs = [2 * e, 2 * e + 1, 2 * e + 2, 2 * e + 3];
            for (r, &row) in dofs.iter().enumerate() {
                for (c, &col) in dofs.iter().enumerate() {
                    raw.stiffness.push(Triplet {
                        row,
                        col,
                        value: k[r][c],
                    });
                    raw.mass.push(Triplet {
                        row,
                        col,
                        value: m[r][c],
                    });
                    if self.rail_damping > 0.0 {
                        raw.damping.push(Triplet {
                            row,
                            col,
                            value: self.rail_damping * k[r][c],
                        });
                    }
                }
            }
        }
        Ok(raw)
    }

    /// Key-value listing of every parameter, one per line.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        let short = self.short_element.map_or("none".to_string(), |e| e.to_string());
        let rows: [(&str, String, &str); 13] = [
            (
                "n_elements",
                self.n_elements.to_string(),
                "rail elements between sleepers",
            ),
            ("element_length", self.element_length.to_string(), "sleeper spacing [m]"),
            ("young_modulus", self.young_modulus.to_string(), "rail steel [Pa]"),
            (
                "second_moment",
                self.second_moment.to_string(),
                "rail bending inertia [m^4]",
            ),
            ("mass_per_length", self.mass_per_length.to_string(), "rail mass [kg/m]"),
            (
                "support_stiffness",
                self.support_stiffness.to_string(),
                "pad and ballast per sleeper [N/m]",
            ),
            (
                "support_damping",
                self.support_damping.to_string(),
                "per sleeper [N s/m]",
            ),
            (
                "rail_damping",
                self.rail_damping.to_string(),
                "stiffness-proportional rail damping [s]",
            ),
            ("clamp_ends", self.clamp_ends.to_string(), "end nodes fully blocked"),
            ("short_element", short, "element split to hold a short piece"),
            (
                "short_ratio",
                self.short_ratio.to_string(),
                "element_length / short piece length",
            ),
            (
                "support_jitter",
                self.support_jitter.to_string(),
                "relative spread of support stiffness",
            ),
            ("seed", self.seed.to_string(), "seed of the support spread"),
        ];
        for (key, value, note) in rows {
            let _ = writeln!(out, "# {note}\ntrack.{key} = {value}");
        }
        out
    }
}

/// Scenario settings shared by the shipped demo configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoScenario {
    pub t_end: f64,
    pub s_start: f64,
    /// Standard-approach step [s].
    pub dt: f64,
    pub cfl: f64,
    /// Moderate mass-scaling cap of the new approach.
    pub m_c: f64,
    pub sweep: Vec<f64>,
    /// First voided sleeper and number of voided sleepers.
    pub voided: (usize, usize),
    pub void_gap: f64,
}

impl Default for DemoScenario {
    fn default() -> Self {
        DemoScenario {
            t_end: 0.5,
            s_start: 7.5,
            dt: 2e-5,
            cfl: 1.0,
            m_c: 1.0,
            sweep: vec![0.5, 2.0, 20.0, 50.0],
            voided: (24, 4),
            void_gap: 3e-3,
        }
    }
}

/// Writes the model files and `params.txt` into `dir`.
pub fn write_demo_model(dir: impl AsRef<Path>, track: &DemoTrack, dip: &DemoDip) -> Result<()> {
    let dir = dir.as_ref();
    let raw = track.build()?;
    write_model_dir(&raw, dir)?;
    let mut params = String::from("# Demo track parameters (SI units). Regenerate instead of editing.\n");
    params.push_str(&track.describe());
    let _ = writeln!(
        params,
        "# crossing dip [m]\nprofile.center = {}\nprofile.depth = {}\nprofile.half_length = {}",
        dip.center, dip.depth, dip.half_length
    );
    let path = dir.join("params.txt");
    std::fs::write(&path, params).map_err(|e| Error::io(&path, e))
}

/// Full demo asset set: `model/`, `profile.csv` and the scenario files
/// `new.cfg`, `standard.cfg`, `file_exchange.cfg`, `voided.cfg`.
pub fn write_demo_assets(
    dir: impl AsRef<Path>,
    track: &DemoTrack,
    dip: &DemoDip,
    scenario: &DemoScenario,
) -> Result<()> {
    let dir = dir.as_ref();
    write_demo_model(dir.join("model"), track, dip)?;
    dip.profile()?.write_csv(dir.join("profile.csv"))?;

    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    let common = |name: &str, approach: &str| {
        format!(
            "# Generated demo scenario; see model/params.txt for the track.\n\
             run.name = {name}\n\
             run.approach = {approach}\n\
             track.model_dir = model\n\
             profile.file = profile.csv\n\
             run.t_end = {}\n\
             run.s_start = {}\n\
             run.dt = {}\n\
             run.cfl = {}\n\
             run.m_c = {}\n\
             run.output = out/{name}\n",
            scenario.t_end, scenario.s_start, scenario.dt, scenario.cfl, scenario.m_c
        )
    };
    let voided = track.sleeper_dofs(scenario.voided.0, scenario.voided.1);
    let voided = voided.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
    let files = [
        (
            "new.cfg",
            format!("{}sweep.m_c = {}\n", common("new", "new"), list(&scenario.sweep)),
        ),
        ("standard.cfg", common("standard", "standard")),
        (
            "file_exchange.cfg",
            format!("{}run.transport = file_exchange\n", common("file_exchange", "standard")),
        ),
        (
            "voided.cfg",
            format!(
                "{}track.voided_dofs = {voided}\ntrack.void_gap = {}\n",
                common("voided", "new"),
                scenario.void_gap
            ),
        ),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
