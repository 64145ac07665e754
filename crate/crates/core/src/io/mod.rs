//! File formats: configuration, snapshots and energy series.

pub mod config;
pub mod series;
pub mod snapshot;
