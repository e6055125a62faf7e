//! Simulator and analysis toolkit for delayed self-reinforcement (DSR)
//! information transfer on agent networks.
//!
//! The numerical modules are generic over [`Scalar`] (`f32` or `f64`);
//! the aliases below fix the scalar to `f64`, which is what the command-line
//! harness uses.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod continuum;
pub mod dsr;
pub mod error;
pub mod flocking;
pub mod harness;
pub mod noise;
pub mod scalar;
pub mod topology;

pub use error::SimError;
pub use noise::NoiseStream;
pub use scalar::Scalar;

pub type Position64 = topology::Position<f64>;
pub type Topology64 = topology::NetworkTopology<f64>;
pub type DsrParams64 = dsr::DsrParams<f64>;
pub type InfoState64 = dsr::InfoState<f64>;
pub type Trajectory64 = dsr::Trajectory<f64>;
pub type SourceSignal64 = dsr::SourceSignal<f64>;
pub type FlockParams64 = flocking::FlockParams<f64>;
pub type FlockTrajectory64 = flocking::FlockTrajectory<f64>;
pub type ContinuumParams64 = continuum::ContinuumParams<f64>;
pub type DiffusionParams64 = continuum::DiffusionParams<f64>;
pub type SecondOrderState64 = continuum::SecondOrderState<f64>;

pub type Topology32 = topology::NetworkTopology<f32>;
pub type DsrParams32 = dsr::DsrParams<f32>;
pub type Trajectory32 = dsr::Trajectory<f32>;
