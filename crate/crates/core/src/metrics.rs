//! Trace comparison, impact-peak detection and mass-scaling sweeps.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::coupling::{run_new, CoSimOptions, CoSimRun, RailProfile, VehicleModel};
use crate::error::{Error, Result};
use crate::model::TrackModel;
use crate::timestep::MassScaling;
use crate::trace::Trace;

/// A local maximum of the contact force.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub t: f64,
    pub s: f64,
    pub force: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Only maxima strictly above this force count [N].
    pub threshold: f64,
    /// Minimum time between two reported peaks [s].
    pub window: f64,
}

impl PeakOptions {
    /// Threshold 1.2 W with a 5 ms separation window.
    pub fn for_static_load(w: f64) -> Self {
        PeakOptions {
            threshold: 1.2 * w,
            window: 5e-3,
        }
    }
}

/// Strict local maxima of `F_contact` above the threshold. When two
/// candidates are closer than the window, the higher one wins.
pub fn detect_peaks(trace: &Trace, options: &PeakOptions) -> Vec<Peak> {
    let f = &trace.f_contact;
    let mut candidates: Vec<usize> = (1..f.len().saturating_sub(1))
        .filter(|&i| f[i] > f[i - 1] && f[i] > f[i + 1] && f[i] > options.threshold)
        .collect();
    candidates.sort_by(|&a, &b| f[b].total_cmp(&f[a]).then(a.cmp(&b)));
    let mut accepted: Vec<usize> = Vec::new();
    for i in candidates {
        if accepted
            .iter()
            .all(|&j| (trace.t[i] - trace.t[j]).abs() >= options.window)
        {
            accepted.push(i);
        }
    }
    accepted.sort_unstable();
    accepted
        .into_iter()
        .map(|i| Peak {
            t: trace.t[i],
            s: trace.s_wheel[i],
            force: f[i],
        })
        .collect()
}

/// Median contact force, a robust estimate of the static wheel load when the
/// trace is mostly quiet.
pub fn median_force(trace: &Trace) -> Option<f64> {
    let mut f: Vec<f64> = trace.f_contact.iter().copied().filter(|v| v.is_finite()).collect();
    if f.is_empty() {
        return None;
    }
    f.sort_by(f64::total_cmp);
    Some(f[f.len() / 2])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMetrics {
    /// `max |u - u_ref| / max |u_ref|` over the common window on the coarser grid.
    pub max_rel_disp_dev: f64,
    /// Peaks of the candidate trace.
    pub peak_forces: Vec<Peak>,
    /// Peaks of the reference trace.
    pub reference_peaks: Vec<Peak>,
    /// Largest relative difference between a reference peak and the
    /// candidate's maximum force within half a window of it.
    pub peak_amplitude_dev: Option<f64>,
    /// `wall-clock(reference) / wall-clock(candidate)` when timings are known.
    pub cpu_ratio: Option<f64>,
    /// Sample spacing of the candidate trace [s].
    pub dt_used: f64,
    /// Common time window `[start, end]` [s].
    pub window: (f64, f64),
}

impl ComparisonMetrics {
    pub fn summary_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        format!(
            "max_rel_disp_dev,peak_amplitude_dev,cpu_ratio,dt_used,n_peaks,n_peaks_ref\n{:e},{},{},{:e},{},{}\n",
            self.max_rel_disp_dev,
            opt(self.peak_amplitude_dev),
            opt(self.cpu_ratio),
            self.dt_used,
            self.peak_forces.len(),
            self.reference_peaks.len()
        )
    }

    /// Both peak lists with header `trace,t,s,F`.
    pub fn peaks_csv(&self) -> String {
        let mut out = String::from("trace,t,s,F\n");
        for (name, peaks) in [("candidate", &self.peak_forces), ("reference", &self.reference_peaks)] {
            for p in peaks {
                let _ = writeln!(out, "{name},{:e},{:e},{:e}", p.t, p.s, p.force);
            }
        }
        out
    }
}

/// Linear interpolation of `y(t)` at `x`, `t` sorted ascending and `x` inside.
fn interpolate(t: &[f64], y: &[f64], x: f64) -> f64 {
    let i = t.partition_point(|&v| v <= x);
    if i == 0 {
        return y[0];
    }
    if i == t.len() {
        return y[t.len() - 1];
    }
    let w = (x - t[i - 1]) / (t[i] - t[i - 1]);
    y[i - 1] + w * (y[i] - y[i - 1])
}

/// Compares `trace` against `reference`. Both are resampled onto the
/// coarser of the two time grids inside their common window.
pub fn compare_traces(
    trace: &Trace,
    reference: &Trace,
    peaks: &PeakOptions,
    timings: Option<(f64, f64)>,
) -> Result<ComparisonMetrics> {
    if trace.len() < 2 || reference.len() < 2 {
        return Err(Error::InvalidArgument("traces need at least two samples".into()));
    }
    let start = trace.t[0].max(reference.t[0]);
    let end = trace.t[trace.len() - 1].min(reference.t[reference.len() - 1]);
    if start > end {
        return Err(Error::DisjointTraces);
    }
    let coarse_is_candidate = trace.mean_spacing() >= reference.mean_spacing();
    let grid: Vec<f64> = if coarse_is_candidate { &trace.t } else { &reference.t }
        .iter()
        .copied()
        .filter(|&t| t >= start && t <= end)
        .collect();
    let mut dev = 0.0f64;
    let mut scale = 0.0f64;
    for &t in &grid {
        let u = interpolate(&trace.t, &trace.u_wheel, t);
        let u_ref = interpolate(&reference.t, &reference.u_wheel, t);
        dev = dev.max((u - u_ref).abs());
        scale = scale.max(u_ref.abs());
    }
    let max_rel_disp_dev = match (dev == 0.0, scale > 0.0) {
        (true, _) => 0.0,
        (false, true) => dev / scale,
        (false, false) => f64::INFINITY,
    };

    let in_window = |p: &Peak| p.t >= start && p.t <= end;
    let peak_forces: Vec<Peak> = detect_peaks(trace, peaks).into_iter().filter(in_window).collect();
    let reference_peaks: Vec<Peak> = detect_peaks(reference, peaks).into_iter().filter(in_window).collect();
    let peak_amplitude_dev = reference_peaks
        .iter()
        .map(|p| {
            let local = trace
                .t
                .iter()
                .zip(&trace.f_contact)
                .filter(|(t, _)| (**t - p.t).abs() <= 0.5 * peaks.window)
                .map(|(_, f)| *f)
                .fold(f64::NEG_INFINITY, f64::max);
            if local.is_finite() {
                (local - p.force).abs() / p.force
            } else {
                f64::INFINITY
            }
        })
        .reduce(f64::max);

    let cpu_ratio = match timings {
        Some((reference_s, candidate_s)) if reference_s > 0.0 && candidate_s > 0.0 => Some(reference_s / candidate_s),
        Some(_) => return Err(Error::InvalidArgument("wall-clock times must be positive".into())),
        None => None,
    };
    Ok(ComparisonMetrics {
        max_rel_disp_dev,
        peak_forces,
        reference_peaks,
        peak_amplitude_dev,
        cpu_ratio,
        dt_used: trace.mean_spacing().unwrap_or(f64::NAN),
        window: (start, end),
    })
}

/// Convenience wrapper comparing two co-simulation runs with their timings.
pub fn compare_runs(run: &CoSimRun, reference: &CoSimRun, peaks: &PeakOptions) -> Result<ComparisonMetrics> {
    let mut m = compare_traces(
        &run.trace,
        &reference.trace,
        peaks,
        Some((
            reference.timings.total.max(f64::MIN_POSITIVE),
            run.timings.total.max(f64::MIN_POSITIVE),
        )),
    )?;
    m.dt_used = run.dt_track;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m_c: f64,
    /// `Err` holds the failure message of a diverged or rejected run.
    pub outcome: std::result::Result<SweepResult, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepResult {
    pub dt: f64,
    pub cpu_ratio: f64,
    pub max_rel_disp_dev: f64,
    pub peak_amplitude_dev: Option<f64>,
    pub total_added_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Successful rows ordered by increasing `m_c`.
    fn sorted_ok(&self) -> Vec<(f64, SweepResult)> {
        let mut ok: Vec<(f64, SweepResult)> = self
            .rows
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|o| (r.m_c, *o)))
            .collect();
        ok.sort_by(|a, b| a.0.total_cmp(&b.0));
        ok
    }

    /// Time step strictly increasing with `m_c` over the successful rows.
    pub fn dt_strictly_increasing(&self) -> bool {
        self.sorted_ok().windows(2).all(|w| w[1].1.dt > w[0].1.dt)
    }

    /// Deviation nondecreasing with `m_c` over the successful rows.
    pub fn deviation_nondecreasing(&self) -> bool {
        self.sorted_ok()
            .windows(2)
            .all(|w| w[1].1.max_rel_disp_dev >= w[0].1.max_rel_disp_dev)
    }

    pub fn all_succeeded(&self) -> bool {
        self.rows.iter().all(|r| r.outcome.is_ok())
    }

    /// Header `m_c,dt,cpu_ratio,max_rel_disp_dev,peak_amplitude_dev,total_added_mass,status`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m_c,dt,cpu_ratio,max_rel_disp_dev,peak_amplitude_dev,total_added_mass,status\n");
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => {
                    let peak = r.peak_amplitude_dev.map_or(String::new(), |v| format!("{v:e}"));
                    let _ = writeln!(
                        out,
                        "{:e},{:e},{:e},{:e},{peak},{:e},ok",
                        row.m_c, r.dt, r.cpu_ratio, r.max_rel_disp_dev, r.total_added_mass
                    );
                }
                Err(message) => {
                    let clean = message.replace([',', '\n'], ";");
                    let _ = writeln!(out, "{:e},,,,,,failed: {clean}", row.m_c);
                }
            }
        }
        out
    }
}

/// Inputs shared by every member of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepSetup<'a> {
    pub vehicle: &'a VehicleModel,
    pub model: &'a TrackModel,
    pub profile: &'a RailProfile,
    pub options: &'a CoSimOptions,
    /// Scaling parameters except the cap, which each row overrides.
    pub scaling: MassScaling,
    pub peaks: PeakOptions,
}

/// Runs the new approach once per cap and compares each run with `reference`.
/// Members run concurrently unless `serial`; rows keep the order of `caps`.
/// A failing member is recorded and does not stop the sweep.
pub fn sweep_mass_scaling(setup: &SweepSetup<'_>, reference: &CoSimRun, caps: &[f64], serial: bool) -> SweepTable {
    let member = |&m_c: &f64| -> SweepRow {
        let outcome = (|| -> Result<SweepResult> {
            let scaling = MassScaling {
                cap: m_c,
                ..setup.scaling
            };
            let run = run_new(setup.vehicle, setup.model, setup.profile, &scaling, setup.options)?;
            let metrics = compare_runs(&run, reference, &setup.peaks)?;
            let report = run.mass_scaling.as_ref().expect("new approach reports its scaling");
            Ok(SweepResult {
                dt: run.dt_track,
                cpu_ratio: metrics.cpu_ratio.unwrap_or(f64::NAN),
                max_rel_disp_dev: metrics.max_rel_disp_dev,
                peak_amplitude_dev: metrics.peak_amplitude_dev,
                total_added_mass: report.total_added_mass,
            })
        })()
        .map_err(|e| e.to_string());
        SweepRow { m_c, outcome }
    };
    let rows = if serial {
        caps.iter().map(member).collect()
    } else {
        caps.par_iter().map(member).collect()
    };
    SweepTable { rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(t: &[f64], u: &[f64], f: &[f64]) -> Trace {
        let mut tr = Trace::new(Vec::new());
        for i in 0..t.len() {
            tr.push(t[i], 30.0 * t[i], f[i], u[i], &[]);
        }
        tr
    }

    fn smooth(n: usize, dt: f64) -> Trace {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let u: Vec<f64> = t.iter().map(|t| 1e-3 * (1.0 + (40.0 * t).sin())).collect();
        let f = vec![1e5; n];
        trace(&t, &u, &f)
    }

    #[test]
    fn identical_traces_have_zero_deviation() {
        let a = smooth(500, 1e-4);
        let m = compare_traces(&a, &a, &PeakOptions::for_static_load(1e5), Some((2.0, 1.0))).unwrap();
        assert_eq!(m.max_rel_disp_dev, 0.0);
        assert_eq!(m.cpu_ratio, Some(2.0));
        assert!(m.peak_forces.is_empty());
    }

    #[test]
    fn uniform_one_percent_offset() {
        let r = smooth(500, 1e-4);
        let mut a = r.clone();
        a.u_wheel.iter_mut().for_each(|u| *u *= 1.01);
        let m = compare_traces(&a, &r, &PeakOptions::for_static_load(1e5), None).unwrap();
        assert!((m.max_rel_disp_dev - 0.01).abs() < 1e-12, "{}", m.max_rel_disp_dev);
    }

    #[test]
    fn resampling_uses_the_coarser_grid() {
        // A linear signal is reproduced exactly by linear interpolation.
        let lin = |n: usize, dt: f64| {
            let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
            let u: Vec<f64> = t.iter().map(|t| 1e-3 + 2e-3 * t).collect();
            trace(&t, &u, &vec![0.0; n])
        };
        let fine = lin(1001, 1e-4);
        let coarse = lin(34, 3e-3);
        let m = compare_traces(&coarse, &fine, &PeakOptions::for_static_load(1.0), None).unwrap();
        assert!(m.max_rel_disp_dev < 1e-13);
        assert_eq!(m.window.1, 0.099);
    }

    #[test]
    fn disjoint_windows_rejected() {
        let a = smooth(10, 1e-3);
        let mut b = smooth(10, 1e-3);
        b.t.iter_mut().for_each(|t| *t += 1.0);
        assert!(matches!(
            compare_traces(&a, &b, &PeakOptions::for_static_load(1.0), None),
            Err(Error::DisjointTraces)
        ));
    }

    #[test]
    fn two_injected_bumps_are_found() {
        let dt = 1e-5;
        let n = 10_000;
        let w = 80_000.0;
        let bump = |t: f64, c: f64, h: f64, width: f64| h * (-((t - c) / width).powi(2)).exp();
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        // A sharp 60 kN bump (P1-like) and a broad 25 kN bump (P2-like) 10 ms later,
        // plus a small ripple that stays under the threshold.
        let f: Vec<f64> = t
            .iter()
            .map(|&t| w + bump(t, 0.030, 60e3, 2e-4) + bump(t, 0.040, 25e3, 2e-3) + 3e3 * (5e3 * t).sin())
            .collect();
        let tr = trace(&t, &vec![0.0; n], &f);
        let peaks = detect_peaks(&tr, &PeakOptions::for_static_load(w));
        assert_eq!(peaks.len(), 2, "{peaks:?}");
        assert!((peaks[0].t - 0.030).abs() < 2e-4 && (peaks[0].force - (w + 60e3)).abs() < 4e3);
        assert!((peaks[1].t - 0.040).abs() < 1e-3 && (peaks[1].force - (w + 25e3)).abs() < 4e3);
    }

    #[test]
    fn close_candidates_keep_the_higher() {
        let t: Vec<f64> = (0..7).map(|i| i as f64 * 1e-3).collect();
        let f = [0.0, 5.0, 0.0, 7.0, 0.0, 6.0, 0.0];
        let tr = trace(&t, &[0.0; 7], &f);
        let peaks = detect_peaks(
            &tr,
            &PeakOptions {
                threshold: 1.0,
                window: 2.5e-3,
            },
        );
        assert_eq!(peaks.iter().map(|p| p.force).collect::<Vec<_>>(), vec![7.0]);
        let peaks = detect_peaks(
            &tr,
            &PeakOptions {
                threshold: 1.0,
                window: 1.5e-3,
            },
        );
        assert_eq!(peaks.len(), 3);
    }

    #[test]
    fn sweep_table_flags() {
        let ok = |m_c: f64, dt: f64, dev: f64| SweepRow {
            m_c,
            outcome: Ok(SweepResult {
                dt,
                cpu_ratio: 1.0,
                max_rel_disp_dev: dev,
                peak_amplitude_dev: None,
                total_added_mass: 0.0,
            }),
        };
        let table = SweepTable {
            rows: vec![
                ok(2.0, 2.0, 0.02),
                ok(1.0, 1.0, 0.01),
                SweepRow {
                    m_c: 3.0,
                    outcome: Err("diverged, step 4".into()),
                },
            ],
        };
        assert!(table.dt_strictly_increasing());
        assert!(table.deviation_nondecreasing());
        assert!(!table.all_succeeded());
        let csv = table.to_csv();
        assert!(csv.lines().nth(3).unwrap().ends_with("failed: diverged; step 4"));
    }
}
