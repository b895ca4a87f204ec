//! Permutation-invariant set autoencoder with a small reverse-mode autodiff
//! engine, exact assignment, latent interpolation and a multi-agent fusion
//! network built on the autoencoder.
//!
//! Everything numeric is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix the common choices.

pub mod assignment;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod fusion;
pub mod interpolate;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod set;
pub mod tape;
pub mod tensor;
pub mod train;

pub use error::{CheckpointError, Error, Result};
pub use scalar::Scalar;

pub type Tensor32 = tensor::Tensor<f32>;
pub type Tensor64 = tensor::Tensor<f64>;
pub type ElementSet32 = set::ElementSet<f32>;
pub type ElementSet64 = set::ElementSet<f64>;
pub type ParamStore32 = params::ParamStore<f32>;
pub type ParamStore64 = params::ParamStore<f64>;
pub type PisaModel32 = model::PisaModel<f32>;
pub type PisaModel64 = model::PisaModel<f64>;
pub type FusionSystem32 = fusion::FusionSystem<f32>;
pub type FusionSystem64 = fusion::FusionSystem<f64>;
