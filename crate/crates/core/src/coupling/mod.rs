//! Wheel/rail coupling: load distribution along the rail, rail surface
//! profile, the vehicle model and the co-simulation drivers.

mod cosim;
mod hermite;
mod moving_load;
mod profile;
mod transport;
mod vehicle;

pub use cosim::{run_new, run_standard, Approach, CoSimOptions, CoSimRun, Timings, TransportKind};
pub use hermite::{
    apply_point_load, displacement_at, displacement_under_wheel, distribute_force, hermite_weights, NodalLoad,
};
pub use moving_load::MovingLoad;
pub use profile::RailProfile;
pub use vehicle::{contact_force, vehicle_step, Suspension, VehicleModel, VehicleState, GRAVITY};
