//! Railway vehicle/track interaction: a flexible track model advanced by an
//! explicit lumped-mass solver or an implicit Newmark solver, coupled to a
//! two-mass vehicle through Hertzian wheel/rail contact.
//!
//! The usual flow is [`model::load_model_dir`] to read a model,
//! [`model::TrackModel::build`] to lump and condense it,
//! [`timestep::mass_scale`] to pick the explicit step, and
//! [`coupling::run_new`] or [`coupling::run_standard`] to simulate a vehicle
//! pass. [`scenario::Scenario`] wires these together from a config file.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Units are written in brackets, `[m]`, `[N/m]`; they are not links.
#![allow(rustdoc::broken_intra_doc_links)]

pub mod coupling;
pub mod demo;
pub mod error;
pub mod explicit;
pub mod implicit;
pub mod metrics;
pub mod model;
pub mod scenario;
pub mod timestep;
pub mod trace;

pub use error::{Error, Result};
