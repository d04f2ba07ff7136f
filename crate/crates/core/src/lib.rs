//! Gradient-based active mapping on occupancy grids.

pub mod cli;
pub mod error;
pub mod gridmap;
pub mod liegroups;
pub mod objective;
pub mod planner;
pub mod sensor;
pub mod sim;
pub mod smi;
pub mod verify;
pub mod viewgrid;

pub use error::{Error, Result};
