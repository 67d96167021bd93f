//! Billiard trajectories in the exterior of smooth obstacles inside a
//! bounding ball, and Monte Carlo estimators built on their travelling
//! times: phase-space volume checks, obstacle volume recovery, trapped-set
//! measure, reflection-count statistics and perturbation sweeps.

pub mod bundled;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod measure;
pub mod raycast;
pub mod scene_file;
pub mod stats;

pub use error::{Error, Result};
