//! Scenario loading, experiment drivers, and output formats for the
//! SO(3) geometric control toolkit. The `geo-ctrl` binary is a thin
//! argument parser over this library.

pub mod experiments;
pub mod records;
pub mod scenario;

pub use geo_ctrl_core as core;
