//! Multi-programming of surface-code workloads on a shared tile floorplan.

pub mod cli;
pub mod cultivation;
pub mod engine;
pub mod floorplan;
pub mod metrics;
pub mod placement;
pub mod policies;
pub mod workload;
