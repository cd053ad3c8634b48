//! Time traces of a simulation and their CSV form.
//!
//! Header: `t,s_wheel,F_contact,u_under_wheel[,probe...]`. Every value is
//! written with 17 significant digits so files reproduce bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const TRACE_HEADER: [&str; 4] = ["t", "s_wheel", "F_contact", "u_under_wheel"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub t: Vec<f64>,
    pub s_wheel: Vec<f64>,
    pub f_contact: Vec<f64>,
    pub u_wheel: Vec<f64>,
    pub probe_names: Vec<String>,
    /// One column per probe.
    pub probes: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(probe_names: Vec<String>) -> Self {
        let probes = vec![Vec::new(); probe_names.len()];
        Trace {
            probe_names,
            probes,
            ..Default::default()
        }
    }

    pub fn push(&mut self, t: f64, s: f64, force: f64, u: f64, probes: &[f64]) {
        debug_assert_eq!(probes.len(), self.probes.len());
        self.t.push(t);
        self.s_wheel.push(s);
        self.f_contact.push(force);
        self.u_wheel.push(u);
        for (col, v) in self.probes.iter_mut().zip(probes) {
            col.push(*v);
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Mean sample spacing [s], `None` with fewer than two samples.
    pub fn mean_spacing(&self) -> Option<f64> {
        (self.len() >= 2).then(|| (self.t[self.len() - 1] - self.t[0]) / (self.len() - 1) as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(80 * (self.len() + 1));
        out.push_str(&TRACE_HEADER.join(","));
        for name in &self.probe_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.t[i], self.s_wheel[i], self.f_contact[i], self.u_wheel[i]
            );
            for col in &self.probes {
                let _ = write!(out, ",{:.16e}", col[i]);
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    pub(crate) fn parse_csv(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "empty trace file"))?
            .split(',')
            .map(str::trim)
            .collect();
        if header.len() < 4 || header[..4] != TRACE_HEADER {
            return Err(Error::parse(
                path,
                1,
                format!("expected header starting `{}`", TRACE_HEADER.join(",")),
            ));
        }
        let mut trace = Trace::new(header[4..].iter().map(|s| s.to_string()).collect());
        let mut row = Vec::with_capacity(header.len());
        for (idx, line) in lines.enumerate() {
            let lineno = idx + 2;
            if line.trim().is_empty() {
                continue;
            }
            row.clear();
            for field in line.split(',') {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(path, lineno, format!("cannot parse `{field}`")))?;
                row.push(v);
            }
            if row.len() != header.len() {
                return Err(Error::parse(
                    path,
                    lineno,
                    format!("expected {} fields, found {}", header.len(), row.len()),
                ));
            }
            trace.push(row[0], row[1], row[2], row[3], &row[4..]);
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut trace = Trace::new(vec!["w12".into()]);
        trace.push(0.0, 1.5, 1.0 / 3.0, -2.0e-4 / 7.0, &[f64::MIN_POSITIVE]);
        trace.push(1e-5, 1.5003, 84366.0 + 1.0 / 7.0, 1e-300, &[-0.1]);
        let text = trace.to_csv();
        assert!(text.starts_with("t,s_wheel,F_contact,u_under_wheel,w12\n"));
        let back = Trace::parse_csv(&text, Path::new("x.csv")).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(Trace::parse_csv("time,s\n", Path::new("x.csv")).is_err());
        assert!(Trace::parse_csv("t,s_wheel,F_contact,u_under_wheel\n1,2,3\n", Path::new("x.csv")).is_err());
    }
}
