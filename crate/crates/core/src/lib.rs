//! Simulation of local measurement strategies for estimating the entanglement
//! of an unknown two-qubit pure state.
//!
//! The numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! experiment drivers and the CLI work in `f64` through the aliases below.

#![allow(clippy::needless_range_loop)]

pub mod classical;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod literal;
pub mod nogo;
pub mod quantum;
pub mod sampling;
pub mod scalar;
pub mod stats;
pub mod tomography;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PureState64 = quantum::PureState<f64>;
pub type PureState32 = quantum::PureState<f32>;
pub type ReducedState64 = quantum::ReducedState<f64>;
pub type EntanglementValues64 = quantum::EntanglementValues<f64>;
pub type DirectionTriple64 = tomography::DirectionTriple<f64>;
pub type DirectionTriple32 = tomography::DirectionTriple<f32>;
pub type UncertaintyReport64 = tomography::UncertaintyReport<f64>;
pub type ObservableBasis64 = nogo::ObservableBasis<f64>;
pub type KMatrixReport64 = nogo::KMatrixReport<f64>;
