//! Simulation and analysis of piecewise-smooth systems with two intersecting
//! switching surfaces: Filippov sliding on the codimension-2 intersection,
//! its bilinear regularization, stochastic Euler ensembles and exit detection.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod filippov;
pub mod integrate;
pub mod io;
pub mod model;
pub mod regularization;

pub use error::{PwsError, Result};
pub use model::{load_preset, Preset, ProjectionTable, PwsSystem, RegionId, Surface};
