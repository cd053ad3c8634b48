use crate::error::{Error, Result};
use crate::model::{RailLine, RailSegment, TrackModel};

/// Cubic Hermite (Euler-Bernoulli) shape functions at local coordinate `xi`
/// of an element of length `length`, ordered `(w_a, theta_a, w_b, theta_b)`.
pub fn hermite_weights(xi: f64, length: f64) -> Result<[f64; 4]> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::InvalidArgument(format!("local coordinate {xi} outside [0, 1]")));
    }
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "element length must be positive, got {length}"
        )));
    }
    let (xi2, xi3) = (xi * xi, xi * xi * xi);
    Ok([
        1.0 - 3.0 * xi2 + 2.0 * xi3,
        length * (xi - 2.0 * xi2 + xi3),
        3.0 * xi2 - 2.0 * xi3,
        length * (xi3 - xi2),
    ])
}

/// Point-load weights on an element: Hermite when both nodes carry a
/// rotation dof, linear otherwise.
fn segment_weights(seg: &RailSegment, xi: f64) -> Result<[f64; 4]> {
    if seg.node_a.dof_theta.is_some() && seg.node_b.dof_theta.is_some() {
        hermite_weights(xi, seg.length)
    } else {
        Ok([1.0 - xi, 0.0, xi, 0.0])
    }
}

/// Nodal loads equivalent to a point load; at most four entries on original dofs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodalLoad {
    pub entries: [(usize, f64); 4],
    pub len: usize,
}

impl NodalLoad {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries[..self.len].iter().copied()
    }

    fn push(&mut self, dof: usize, value: f64) {
        self.entries[self.len] = (dof, value);
        self.len += 1;
    }
}

fn unblocked_dofs(seg: &RailSegment) -> [Option<usize>; 4] {
    let (a, b) = (&seg.node_a, &seg.node_b);
    [
        a.dof_w.filter(|_| !a.blocked_w),
        a.dof_theta.filter(|_| !a.blocked_theta),
        b.dof_w.filter(|_| !b.blocked_w),
        b.dof_theta.filter(|_| !b.blocked_theta),
    ]
}

/// Spreads a vertical point load `force` at arclength `s` onto the nodes of
/// the element containing it. Shares on blocked dofs are dropped.
pub fn distribute_force(force: f64, s: f64, rail: &RailLine) -> Result<NodalLoad> {
    let (e, xi) = rail.locate(s)?;
    let seg = &rail.segments()[e];
    let weights = segment_weights(seg, xi)?;
    let mut load = NodalLoad::default();
    for (dof, w) in unblocked_dofs(seg).into_iter().zip(weights) {
        if let Some(d) = dof {
            load.push(d, force * w);
        }
    }
    Ok(load)
}

/// Rail deflection at arclength `s` interpolated with the same weights as
/// [`distribute_force`]; `value` maps an original dof to its displacement.
pub fn displacement_under_wheel(value: impl Fn(usize) -> f64, s: f64, rail: &RailLine) -> Result<f64> {
    let (e, xi) = rail.locate(s)?;
    let seg = &rail.segments()[e];
    let weights = segment_weights(seg, xi)?;
    Ok(unblocked_dofs(seg)
        .into_iter()
        .zip(weights)
        .filter_map(|(d, w)| d.map(|d| w * value(d)))
        .sum())
}

/// Deflection under `s` for retained displacements `x` of `model`.
pub fn displacement_at(model: &TrackModel, x: &[f64], s: f64) -> Result<f64> {
    displacement_under_wheel(|d| model.dof_value(x, d), s, model.rail_line())
}

/// Adds a point load at `s` to the retained-dof load vector `out`.
pub fn apply_point_load(model: &TrackModel, force: f64, s: f64, out: &mut [f64]) -> Result<()> {
    for (d, f) in distribute_force(force, s, model.rail_line())?.iter() {
        model.project_load(d, f, out);
    }
    Ok(())
}
