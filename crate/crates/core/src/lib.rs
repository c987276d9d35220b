//! Infrared small-target video super-resolution toolkit.
//!
//! The numeric core is generic over [`Real`] (`f32`/`f64`); the aliases below pin the
//! two precisions used in practice.

pub mod data;
pub mod detectors;
pub mod error;
pub mod metrics;
pub mod network;
pub mod numerics;
pub mod prior_ops;
pub mod rational;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use rational::Rational;
pub use scalar::Real;

pub type Tensor32 = numerics::Tensor<f32>;
pub type Tensor64 = numerics::Tensor<f64>;
pub type Tape32 = numerics::Tape<f32>;
pub type Tape64 = numerics::Tape<f64>;
