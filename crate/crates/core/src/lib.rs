//! Energy-efficient beamforming and surface phase design for cell-free
//! networks assisted by reconfigurable intelligent surfaces.
//!
//! Everything is generic over [`scalar::Scalar`] (`f32` or `f64`); the
//! aliases below fix `f64`.

// `!(x > 0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod conic;
pub mod driver;
pub mod error;
pub mod model;
pub mod scalar;
pub mod surrogate;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ChannelSet64 = channel::ChannelSet<f64>;
pub type Layout64 = channel::Layout<f64>;
pub type FadingParams64 = channel::FadingParams<f64>;
pub type SystemParams64 = model::SystemParams<f64>;
pub type NetworkState64 = model::NetworkState<f64>;
pub type Beamformers64 = model::Beamformers<f64>;
pub type PhaseVector64 = model::PhaseVector<f64>;
pub type ConeProgram64 = conic::ConeProgram<f64>;
pub type AlgoConfig64 = driver::AlgoConfig<f64>;
pub type Trace64 = driver::Trace<f64>;
