use crate::error::Result;
use crate::explicit::{Excitation, LoadPoint};
use crate::model::TrackModel;

use super::hermite::apply_point_load;

/// Constant point force travelling at constant speed, `s(t) = s_start + speed t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovingLoad {
    /// [N], positive downward
    pub force: f64,
    /// [m]
    pub s_start: f64,
    /// [m/s]; zero gives a stationary load.
    pub speed: f64,
}

impl Excitation for MovingLoad {
    fn load(&mut self, model: &TrackModel, t: f64, out: &mut [f64]) -> Result<Option<LoadPoint>> {
        let s = self.s_start + self.speed * t;
        apply_point_load(model, self.force, s, out)?;
        Ok(Some(LoadPoint { s, force: self.force }))
    }
}
