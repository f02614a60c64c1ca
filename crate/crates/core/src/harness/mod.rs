//! Synthetic scenes, metrics and benchmark orchestration.

pub mod bench;
pub mod metrics;
pub mod scene;
