//! Explicit stability limit and per-dof capped mass scaling.
//!
//! The stable step is estimated from the diagonal ratios only:
//! `dt = cfl * min_i sqrt(M_i / K_ii)`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{DofKind, TrackModel};

/// Default CFL constant, 5/pi.
pub const DEFAULT_CFL: f64 = 5.0 / std::f64::consts::PI;

/// Relative tolerance used to decide that two step ratios coincide.
const RATIO_TOLERANCE: f64 = 1e-12;

/// `cfl * min_i sqrt(M_i / K_ii)` over all given dofs.
pub fn stable_timestep(mass: &[f64], stiffness_diagonal: &[f64], cfl: f64) -> Result<f64> {
    stable_timestep_excluding(mass, stiffness_diagonal, &[], cfl)
}

/// As [`stable_timestep`], skipping dofs flagged in `blocked` (which may be
/// shorter than `mass`; missing flags count as unblocked).
pub fn stable_timestep_excluding(mass: &[f64], stiffness_diagonal: &[f64], blocked: &[bool], cfl: f64) -> Result<f64> {
    if mass.len() != stiffness_diagonal.len() {
        return Err(Error::InvalidArgument(format!(
            "{} masses but {} stiffness terms",
            mass.len(),
            stiffness_diagonal.len()
        )));
    }
    if !(cfl.is_finite() && cfl > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cfl constant must be positive, got {cfl}"
        )));
    }
    let mut min_ratio = f64::INFINITY;
    for (i, (&m, &k)) in mass.iter().zip(stiffness_diagonal).enumerate() {
        if blocked.get(i).copied().unwrap_or(false) {
            continue;
        }
        if !(k > 0.0) {
            return Err(Error::IndefiniteDiagonal { dof: i, value: k });
        }
        if !(m > 0.0) {
            return Err(Error::NonPhysicalMass { dof: i, row_sum: m });
        }
        min_ratio = min_ratio.min((m / k).sqrt());
    }
    if !min_ratio.is_finite() {
        return Err(Error::InvalidArgument("no active dofs".into()));
    }
    Ok(cfl * min_ratio)
}

impl TrackModel {
    pub fn stable_timestep(&self, cfl: f64) -> Result<f64> {
        stable_timestep(self.lumped_mass(), &self.stiffness_diagonal(), cfl)
    }
}

/// Which dofs may receive added mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalingScope {
    #[default]
    AllDofs,
    TranslationOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassScaling {
    /// Largest mass (or rotary inertia) added to any one dof.
    pub cap: f64,
    /// Requested step; defaults to the largest step the cap allows.
    pub target_dt: Option<f64>,
    pub cfl: f64,
    pub scope: ScalingScope,
}

impl MassScaling {
    pub fn with_cap(cap: f64) -> Self {
        MassScaling {
            cap,
            ..Default::default()
        }
    }
}

impl Default for MassScaling {
    fn default() -> Self {
        MassScaling {
            cap: 0.0,
            target_dt: None,
            cfl: DEFAULT_CFL,
            scope: ScalingScope::AllDofs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassScalingReport {
    pub base_dt: f64,
    pub achieved_dt: f64,
    /// Original dof index per retained dof.
    pub dofs: Vec<usize>,
    /// Unscaled `sqrt(M_i / K_ii)` per retained dof [s].
    pub base_ratio: Vec<f64>,
    pub added_mass: Vec<f64>,
    /// Added mass summed over translational dofs [kg].
    pub total_added_mass: f64,
    /// Added rotary inertia summed over rotational dofs [kg m^2].
    pub total_added_inertia: f64,
    /// Original indices of the dofs setting `achieved_dt`.
    pub limiting_dofs: Vec<usize>,
}

impl MassScalingReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e}",
            self.base_dt, self.achieved_dt, self.total_added_mass
        )
    }

    /// `dof,base_ratio,added_mass` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dof,base_ratio,added_mass\n");
        for ((d, r), m) in self.dofs.iter().zip(&self.base_ratio).zip(&self.added_mass) {
            let _ = writeln!(out, "{d},{r:.16e},{m:.16e}");
        }
        out
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join("mass_scaling.csv");
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let summary = dir.join("mass_scaling_summary.csv");
        let text = format!("base_dt,achieved_dt,total_added_mass\n{}\n", self.summary_line());
        std::fs::write(&summary, text).map_err(|e| Error::io(&summary, e))
    }
}

/// Adds mass to the dofs whose diagonal ratio is below the target step, each
/// by the least amount reaching the target, never more than `cap`.
pub fn mass_scale(model: &TrackModel, params: &MassScaling) -> Result<(TrackModel, MassScalingReport)> {
    let cap = params.cap;
    if !(cap.is_finite() && cap >= 0.0) {
        return Err(Error::InvalidArgument(format!("mass cap must be >= 0, got {cap}")));
    }
    let cfl = params.cfl;
    let mass = model.lumped_mass();
    let diag = model.stiffness_diagonal();
    let base_dt = stable_timestep(mass, &diag, cfl)?;

    let eligible: Vec<bool> = model
        .kinds()
        .iter()
        .map(|k| params.scope == ScalingScope::AllDofs || *k == DofKind::Translation)
        .collect();
    let capped: Vec<f64> = mass
        .iter()
        .zip(&eligible)
        .map(|(&m, &e)| if e { m + cap } else { m })
        .collect();
    let feasible = stable_timestep(&capped, &diag, cfl)?;
    let dt = match params.target_dt {
        None => feasible,
        Some(t) if !(t > 0.0) => {
            return Err(Error::InvalidArgument(format!("target step must be positive, got {t}")));
        }
        Some(t) if t > feasible * (1.0 + RATIO_TOLERANCE) => {
            return Err(Error::InfeasibleTimeStep { requested: t, feasible });
        }
        Some(t) => t,
    };

    let ratio_sq = (dt / cfl).powi(2);
    let added: Vec<f64> = (0..mass.len())
        .map(|i| {
            if !eligible[i] {
                return 0.0;
            }
            let need = diag[i] * ratio_sq - mass[i];
            if need <= RATIO_TOLERANCE * mass[i] {
                0.0
            } else {
                need.min(cap)
            }
        })
        .collect();
    let scaled_mass: Vec<f64> = mass.iter().zip(&added).map(|(m, a)| m + a).collect();
    let achieved_dt = stable_timestep(&scaled_mass, &diag, cfl)?;

    let min_ratio = achieved_dt / cfl;
    let limiting_dofs = (0..mass.len())
        .filter(|&i| ((scaled_mass[i] / diag[i]).sqrt() - min_ratio).abs() <= RATIO_TOLERANCE * min_ratio)
        .map(|i| model.original_dof(i))
        .collect();
    let (mut total_added_mass, mut total_added_inertia) = (0.0, 0.0);
    for (a, k) in added.iter().zip(model.kinds()) {
        match k {
            DofKind::Translation => total_added_mass += a,
            DofKind::Rotation => total_added_inertia += a,
        }
    }
    let report = MassScalingReport {
        base_dt,
        achieved_dt,
        dofs: (0..mass.len()).map(|i| model.original_dof(i)).collect(),
        base_ratio: mass.iter().zip(&diag).map(|(m, k)| (m / k).sqrt()).collect(),
        added_mass: added,
        total_added_mass,
        total_added_inertia,
        limiting_dofs,
    };
    Ok((model.with_lumped_mass(scaled_mass)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NodeRecord, RawModel, Triplet};
    use std::f64::consts::PI;

    fn diagonal_model(pairs: &[(f64, f64)]) -> TrackModel {
        let raw = RawModel {
            n_dofs: pairs.len(),
            mass: pairs
                .iter()
                .enumerate()
                .map(|(i, p)| Triplet {
                    row: i,
                    col: i,
                    value: p.0,
                })
                .collect(),
            stiffness: pairs
                .iter()
                .enumerate()
                .map(|(i, p)| Triplet {
                    row: i,
                    col: i,
                    value: p.1,
                })
                .collect(),
            ..Default::default()
        };
        TrackModel::build(&raw).unwrap()
    }

    #[test]
    fn single_dof_step() {
        let dt = stable_timestep(&[1.0], &[1.0], DEFAULT_CFL).unwrap();
        assert!((dt - 5.0 / PI).abs() < 1e-15);
        assert!((dt - 1.59155).abs() < 1e-5);
    }

    #[test]
    fn two_dof_step() {
        let dt = stable_timestep(&[1.0, 4.0], &[100.0, 100.0], DEFAULT_CFL).unwrap();
        assert!((dt - 0.5 / PI).abs() < 1e-15);
        assert!((dt - 0.159155).abs() < 1e-6);
    }

    #[test]
    fn blocked_dofs_ignored() {
        let free = stable_timestep(&[1.0, 4.0], &[100.0, 100.0], DEFAULT_CFL).unwrap();
        let with_blocked = stable_timestep_excluding(
            &[1.0, 4.0, 1.0],
            &[100.0, 100.0, 1e9],
            &[false, false, true],
            DEFAULT_CFL,
        )
        .unwrap();
        assert_eq!(free, with_blocked);

        let raw = RawModel {
            n_dofs: 2,
            mass: vec![
                Triplet {
                    row: 0,
                    col: 0,
                    value: 1.0,
                },
                Triplet {
                    row: 1,
                    col: 1,
                    value: 1.0,
                },
            ],
            stiffness: vec![
                Triplet {
                    row: 0,
                    col: 0,
                    value: 1.0,
                },
                Triplet {
                    row: 1,
                    col: 1,
                    value: 1e9,
                },
            ],
            nodes: vec![NodeRecord {
                id: 0,
                s: 0.0,
                dof_w: Some(1),
                dof_theta: None,
                blocked_w: true,
                blocked_theta: false,
            }],
            ..Default::default()
        };
        let model = TrackModel::build(&raw).unwrap();
        assert_eq!(model.stable_timestep(DEFAULT_CFL).unwrap(), 5.0 / PI);
    }

    #[test]
    fn nonpositive_diagonal_rejected() {
        assert!(matches!(
            stable_timestep(&[1.0, 1.0], &[1.0, 0.0], DEFAULT_CFL),
            Err(Error::IndefiniteDiagonal { dof: 1, .. })
        ));
    }

    #[test]
    fn zero_cap_adds_nothing() {
        let model = diagonal_model(&[(1.0, 100.0), (4.0, 100.0)]);
        let (scaled, report) = mass_scale(&model, &MassScaling::with_cap(0.0)).unwrap();
        assert_eq!(report.added_mass, vec![0.0, 0.0]);
        assert_eq!(report.achieved_dt, report.base_dt);
        assert_eq!(scaled.lumped_mass(), model.lumped_mass());
    }

    #[test]
    fn cap_three_example() {
        let model = diagonal_model(&[(1.0, 100.0), (4.0, 100.0)]);
        let (_, report) = mass_scale(&model, &MassScaling::with_cap(3.0)).unwrap();
        assert!((report.added_mass[0] - 3.0).abs() < 1e-12);
        assert_eq!(report.added_mass[1], 0.0);
        assert!((report.achieved_dt - 1.0 / PI).abs() < 1e-12);
        assert_eq!(report.limiting_dofs, vec![0, 1]);
        assert!((report.total_added_mass - 3.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_target_and_negative_cap() {
        let model = diagonal_model(&[(1.0, 100.0), (4.0, 100.0)]);
        let params = MassScaling {
            cap: 1.0,
            target_dt: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            mass_scale(&model, &params),
            Err(Error::InfeasibleTimeStep { .. })
        ));
        assert!(mass_scale(&model, &MassScaling::with_cap(-1.0)).is_err());
    }

    #[test]
    fn explicit_target_adds_only_what_is_needed() {
        let model = diagonal_model(&[(1.0, 100.0), (4.0, 100.0), (9.0, 100.0)]);
        let target = DEFAULT_CFL * 0.25;
        let params = MassScaling {
            cap: 10.0,
            target_dt: Some(target),
            ..Default::default()
        };
        let (_, report) = mass_scale(&model, &params).unwrap();
        assert!((report.added_mass[0] - 5.25).abs() < 1e-12);
        assert!((report.added_mass[1] - 2.25).abs() < 1e-12);
        assert_eq!(report.added_mass[2], 0.0);
        assert!((report.achieved_dt - target).abs() < 1e-12 * target);
    }

    #[test]
    fn report_csv_layout() {
        let model = diagonal_model(&[(1.0, 100.0)]);
        let (_, report) = mass_scale(&model, &MassScaling::with_cap(3.0)).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("dof,base_ratio,added_mass"));
        assert!(lines.next().unwrap().starts_with("0,1.000000000000000"));
        assert_eq!(report.summary_line().split(',').count(), 3);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
            prop::collection::vec((0.01f64..100.0, 1.0f64..1e6), 1..12)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn achieved_step_grows_with_cap(p in pairs(), caps in prop::collection::vec(0.0f64..500.0, 2..6)) {
                let model = diagonal_model(&p);
                let mut caps = caps;
                caps.sort_by(f64::total_cmp);
                let mut last = 0.0;
                for cap in caps {
                    let (_, r) = mass_scale(&model, &MassScaling::with_cap(cap)).unwrap();
                    prop_assert!(r.achieved_dt >= last);
                    prop_assert!(r.achieved_dt >= r.base_dt);
                    last = r.achieved_dt;
                }
            }

            #[test]
            fn cap_is_respected_and_scaled_model_is_consistent(p in pairs(), cap in 0.0f64..500.0) {
                let model = diagonal_model(&p);
                let (scaled, r) = mass_scale(&model, &MassScaling::with_cap(cap)).unwrap();
                prop_assert!(r.added_mass.iter().all(|&a| (0.0..=cap).contains(&a)));
                let dt = scaled.stable_timestep(DEFAULT_CFL).unwrap();
                prop_assert!((dt - r.achieved_dt).abs() <= 1e-12 * r.achieved_dt);
            }

            #[test]
            fn rescaling_to_the_same_target_adds_nothing(p in pairs(), cap in 0.0f64..500.0) {
                let model = diagonal_model(&p);
                let (scaled, r) = mass_scale(&model, &MassScaling::with_cap(cap)).unwrap();
                let again = MassScaling { target_dt: Some(r.achieved_dt), ..MassScaling::with_cap(cap) };
                let (_, r2) = mass_scale(&scaled, &again).unwrap();
                prop_assert!(r2.added_mass.iter().all(|&a| a == 0.0));
            }

            #[test]
            fn added_mass_is_minimal(p in pairs(), cap in 0.01f64..500.0) {
                let model = diagonal_model(&p);
                let (scaled, r) = mass_scale(&model, &MassScaling::with_cap(cap)).unwrap();
                let diag = model.stiffness_diagonal();
                for (i, &a) in r.added_mass.iter().enumerate() {
                    if a == 0.0 || a == cap {
                        continue;
                    }
                    let mut m = scaled.lumped_mass().to_vec();
                    m[i] -= 1e-6 * cap;
                    let reduced = stable_timestep(&m, &diag, DEFAULT_CFL).unwrap();
                    prop_assert!(reduced < r.achieved_dt);
                }
            }
        }
    }
}
