//! Asymptotic velocity and diffusion coefficient of continuous-time random walks
//! on quasi one-dimensional periodic graphs.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`. Monte Carlo code works in `f64` only.

pub mod cell;
pub mod graph;
pub mod kinetics;
pub mod linsolve;
pub mod mcsim;
pub mod models;
pub mod reduction;
pub mod scalar;

pub use cell::{build_one_cell, build_two_cell, validate_cell, CellError, Violation};
pub use kinetics::{compute, Method};
pub use scalar::Scalar;

pub type Cell = cell::FundamentalCell<f64>;
pub type Validated = cell::ValidatedCell<f64>;
pub type Graph = graph::AbsorbingWalkGraph<f64>;
pub type Chain = reduction::LinearChain<f64>;
pub type Reduced = reduction::ReducedGraph<f64>;
pub type Skeleton = kinetics::SkeletonStats<f64>;
pub type Cycle = kinetics::CycleStats<f64>;
pub type Kinetics = kinetics::Kinetics<f64>;
pub type Periodic = models::PeriodicLinearModel<f64>;
pub type Parallel = models::ParallelChainModel<f64>;

pub type Cell32 = cell::FundamentalCell<f32>;
pub type Periodic32 = models::PeriodicLinearModel<f32>;
