//! Simulation and estimation toolkit for the Brownian frog model.
//!
//! Sleeping particles sit at the points of a unit-intensity Poisson process;
//! active particles perform Brownian motion, and a particle coming within
//! distance r of a sleeping one wakes that particle's whole continuum
//! percolation cluster.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod branching;
pub mod error;
pub mod frogsim;
pub mod motion;
pub mod percolation;
pub mod pointprocess;
pub mod rng;
pub mod stats;
pub mod surgery;
pub mod unionfind;

pub use branching::{BranchLimit, BranchingParams, BranchingRecord, OffspringSample, Particle};
pub use error::{Error, Result};
pub use frogsim::{init_sim, FrontSeries, PassageSample, SimParams, SimState, WakeEvent};
pub use motion::{HitResult, StepPolicy};
pub use percolation::{ClusterLabeling, CrossingMode, CrossingSpec};
pub use pointprocess::{Point, PointSet, Region, SpatialGrid};
pub use surgery::{Growth, GrowthRegion, SurgeryTrial};
