//! Radar–camera multi-object tracking: per-sensor and fused trackers,
//! a scenario simulator and CLEAR evaluation.

pub mod appearance;
pub mod association;
pub mod clustering;
pub mod config;
pub mod detection;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod motion;
pub mod report;
pub mod sim;
pub mod track;
