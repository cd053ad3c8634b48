use crate::error::{Error, Result};

/// Standard gravity [m/s^2].
pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Suspension {
    #[default]
    Flexible,
    /// Sprung and unsprung masses move together (infinitely stiff suspension).
    Rigid,
}

/// Two-dof vertical vehicle: sprung mass on a suspension over one wheel.
/// Vertical coordinates are positive downward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleModel {
    /// [kg]
    pub sprung_mass: f64,
    /// [kg]
    pub wheel_mass: f64,
    /// [N/m]
    pub suspension_stiffness: f64,
    /// [N s/m]
    pub suspension_damping: f64,
    /// Hertz constant [N/m^1.5].
    pub hertz_constant: f64,
    /// Forward speed [m/s].
    pub speed: f64,
    /// [m/s^2]
    pub gravity: f64,
    pub suspension: Suspension,
}

impl Default for VehicleModel {
    /// Half of a loaded freight-car wheelset with its bogie and body share.
    fn default() -> Self {
        VehicleModel {
            sprung_mass: 8000.0,
            wheel_mass: 600.0,
            suspension_stiffness: 1.2e6,
            suspension_damping: 1.0e4,
            hertz_constant: 1.0e11,
            speed: 30.0,
            gravity: GRAVITY,
            suspension: Suspension::Flexible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    /// Wheel position along the rail [m].
    pub s: f64,
    pub z_s: f64,
    pub v_s: f64,
    pub z_w: f64,
    pub v_w: f64,
}

impl VehicleState {
    fn is_finite(&self) -> bool {
        [self.s, self.z_s, self.v_s, self.z_w, self.v_w]
            .iter()
            .all(|v| v.is_finite())
    }
}

impl VehicleModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sprung mass", self.sprung_mass),
            ("wheel mass", self.wheel_mass),
            ("suspension stiffness", self.suspension_stiffness),
            ("Hertz constant", self.hertz_constant),
            ("speed", self.speed),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "vehicle {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.suspension_damping >= 0.0 && self.gravity >= 0.0) {
            return Err(Error::InvalidArgument(
                "vehicle damping and gravity must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Static wheel load `(m_s + m_w) g` [N].
    pub fn static_load(&self) -> f64 {
        (self.sprung_mass + self.wheel_mass) * self.gravity
    }

    /// Penetration carrying the static load, `(W / C_H)^(2/3)`.
    pub fn static_penetration(&self) -> f64 {
        (self.static_load() / self.hertz_constant).powf(2.0 / 3.0)
    }

    /// At rest in static equilibrium on a rail surface at level `rail_level`.
    pub fn initial_state(&self, s: f64, rail_level: f64) -> VehicleState {
        let z_w = rail_level + self.static_penetration();
        let compression = match self.suspension {
            Suspension::Flexible => self.sprung_mass * self.gravity / self.suspension_stiffness,
            Suspension::Rigid => 0.0,
        };
        VehicleState {
            s,
            z_s: z_w + compression,
            v_s: 0.0,
            z_w,
            v_w: 0.0,
        }
    }
}

/// Hertzian normal force for wheel level `z_w` over a rail deflected by `u`
/// with surface deviation `r`. Penetration `z_w - (u + r)` is positive in
/// compression; separation gives zero.
pub fn contact_force(z_w: f64, u: f64, r: f64, hertz_constant: f64) -> f64 {
    let delta = z_w - (u + r);
    if delta > 0.0 {
        hertz_constant * delta * delta.sqrt()
    } else {
        0.0
    }
}

/// Semi-implicit Euler step under gravity, suspension and the contact force
/// (acting upward on the wheel). The wheel advances by `speed * dt`.
pub fn vehicle_step(vehicle: &VehicleModel, state: &VehicleState, contact: f64, dt: f64) -> Result<VehicleState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let g = vehicle.gravity;
    let mut next = *state;
    match vehicle.suspension {
        Suspension::Flexible => {
            let f_susp = vehicle.suspension_stiffness * (state.z_s - state.z_w)
                + vehicle.suspension_damping * (state.v_s - state.v_w);
            let a_s = g - f_susp / vehicle.sprung_mass;
            let a_w = g + (f_susp - contact) / vehicle.wheel_mass;
            next.v_s += dt * a_s;
            next.v_w += dt * a_w;
            next.z_s += dt * next.v_s;
            next.z_w += dt * next.v_w;
        }
        Suspension::Rigid => {
            let a = g - contact / (vehicle.sprung_mass + vehicle.wheel_mass);
            next.v_w += dt * a;
            next.v_s = next.v_w;
            next.z_w += dt * next.v_w;
            next.z_s += dt * next.v_w;
        }
    }
    next.s += vehicle.speed * dt;
    if !next.is_finite() {
        return Err(Error::Divergence { step: 0 });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contact_law() {
        assert_eq!(contact_force(0.0, 1e-4, 0.0, 1e11), 0.0);
        assert_eq!(contact_force(1e-4, 1e-4, 0.0, 1e11), 0.0);
        let f = contact_force(1e-4, 0.0, 0.0, 1e11);
        assert!((f - 1e5).abs() < 1e-6, "{f}");
        let v = VehicleModel::default();
        let f = contact_force(v.static_penetration(), 0.0, 0.0, v.hertz_constant);
        assert!((f - v.static_load()).abs() < 1e-9 * v.static_load());
    }

    #[test]
    fn contact_is_monotone() {
        let mut last = 0.0;
        for k in -10..200 {
            let f = contact_force(k as f64 * 1e-6, 0.0, 0.0, 1e11);
            assert!(f >= last);
            last = f;
        }
    }

    #[test]
    fn zero_gravity_rest_is_fixed_point() {
        let v = VehicleModel {
            gravity: 0.0,
            ..Default::default()
        };
        let mut state = VehicleState::default();
        for _ in 0..100 {
            state = vehicle_step(&v, &state, 0.0, 1e-4).unwrap();
        }
        assert_eq!((state.z_s, state.v_s, state.z_w, state.v_w), (0.0, 0.0, 0.0, 0.0));
        assert!((state.s - 100.0 * 30.0 * 1e-4).abs() < 1e-12);
    }

    #[test]
    fn settles_to_static_load() {
        let v = VehicleModel {
            suspension_damping: 4e4,
            ..Default::default()
        };
        // Contact is undamped; the wheel-on-contact mode keeps a small
        // oscillation, so average the tail instead of sampling one step.
        let mut state = v.initial_state(0.0, 0.0);
        state.z_s -= 1e-3;
        let dt = 2e-5;
        let (mut sum, mut count) = (0.0, 0);
        for k in 0..400_000 {
            let f = contact_force(state.z_w, 0.0, 0.0, v.hertz_constant);
            if k >= 300_000 {
                sum += f;
                count += 1;
            }
            state = vehicle_step(&v, &state, f, dt).unwrap();
        }
        let mean = sum / count as f64;
        assert!((mean - v.static_load()).abs() < 1e-3 * v.static_load(), "{mean}");
    }

    /// Wheel trajectory over a rigid track with a smooth 1 mm, 10 m wave that
    /// starts level, so the undamped contact mode is barely excited.
    fn ride(v: &VehicleModel, dt: f64, steps: usize) -> Vec<f64> {
        use super::super::profile::RailProfile;
        let knots = (0..=400).map(|i| {
            let s = i as f64 * 0.05;
            (s, 0.5e-3 * (1.0 - (2.0 * std::f64::consts::PI * s / 10.0).cos()))
        });
        let profile = RailProfile::new(knots.collect()).unwrap();
        let mut state = v.initial_state(0.0, 0.0);
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let f = contact_force(state.z_w, 0.0, profile.eval(state.s), v.hertz_constant);
            state = vehicle_step(v, &state, f, dt).unwrap();
            out.push(state.z_w);
        }
        out
    }

    #[test]
    fn locked_suspension_matches_rigid_mode() {
        let stiff = VehicleModel {
            suspension_stiffness: 1e10,
            suspension_damping: 0.0,
            ..Default::default()
        };
        let rigid = VehicleModel {
            suspension: Suspension::Rigid,
            ..stiff
        };
        let (a, b) = (ride(&stiff, 1e-5, 50_000), ride(&rigid, 1e-5, 50_000));
        let scale = b.iter().fold(0.0f64, |m, z| m.max(z.abs()));
        let worst = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(worst < 0.01 * scale, "{worst:e} vs {scale:e}");
    }

    #[test]
    fn rejects_bad_step() {
        let v = VehicleModel::default();
        assert!(vehicle_step(&v, &VehicleState::default(), 0.0, 0.0).is_err());
    }
}
