use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Vertical rail-surface deviation along the track, piecewise linear,
/// positive downward [m]. Held constant beyond the first and last knots.
#[derive(Debug, Clone, PartialEq)]
pub struct RailProfile {
    knots: Vec<(f64, f64)>,
}

impl RailProfile {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument("profile needs at least one knot".into()));
        }
        if knots.iter().any(|(s, r)| !s.is_finite() || !r.is_finite()) {
            return Err(Error::InvalidArgument("profile knots must be finite".into()));
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidArgument(
                "profile knots must be strictly increasing in s".into(),
            ));
        }
        Ok(RailProfile { knots })
    }

    pub fn flat() -> Self {
        RailProfile {
            knots: vec![(0.0, 0.0)],
        }
    }

    /// V-shaped dip of `depth` centred at `center`, reached over `half_length`
    /// on each side.
    pub fn dip(center: f64, depth: f64, half_length: f64) -> Result<Self> {
        if !(half_length > 0.0) {
            return Err(Error::InvalidArgument("dip half length must be positive".into()));
        }
        Self::new(vec![
            (center - half_length, 0.0),
            (center, depth),
            (center + half_length, 0.0),
        ])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn eval(&self, s: f64) -> f64 {
        let k = &self.knots;
        let i = k.partition_point(|&(ks, _)| ks <= s);
        if i == 0 {
            return k[0].1;
        }
        if i == k.len() {
            return k[k.len() - 1].1;
        }
        let ((s0, r0), (s1, r1)) = (k[i - 1], k[i]);
        r0 + (r1 - r0) * (s - s0) / (s1 - s0)
    }

    /// CSV with header `s,r`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h.split(',').map(str::trim).eq(["s", "r"]) => {}
            _ => return Err(Error::parse(path, 1, "expected header `s,r`")),
        }
        let mut knots = Vec::new();
        for (idx, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |f: &str| {
                f.parse::<f64>()
                    .map_err(|_| Error::parse(path, idx + 1, format!("cannot parse `{f}`")))
            };
            if fields.len() != 2 {
                return Err(Error::parse(path, idx + 1, "expected 2 fields"));
            }
            knots.push((parse(fields[0])?, parse(fields[1])?));
        }
        Self::new(knots).map_err(|e| Error::parse(path, 0, e.to_string()))
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("s,r\n");
        for (s, r) in &self.knots {
            let _ = writeln!(out, "{s:e},{r:e}");
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_and_clamping() {
        let p = RailProfile::dip(10.0, 2e-3, 0.5).unwrap();
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.eval(10.0), 2e-3);
        assert!((p.eval(9.75) - 1e-3).abs() < 1e-15);
        assert_eq!(p.eval(20.0), 0.0);
        assert_eq!(RailProfile::flat().eval(123.0), 0.0);
    }

    #[test]
    fn knots_must_increase() {
        assert!(RailProfile::new(vec![(1.0, 0.0), (1.0, 1.0)]).is_err());
        assert!(RailProfile::new(vec![]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let p = RailProfile::dip(3.3, 1.5e-3, 0.25).unwrap();
        p.write_csv(&path).unwrap();
        assert_eq!(RailProfile::read_csv(&path).unwrap(), p);
    }
}
