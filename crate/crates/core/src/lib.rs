//! Synthetic RGB-D scene generation and scale-invariant depth training.
//!
//! The crate covers the whole loop at desk scale: procedurally generated
//! scenes rendered to paired RGB and metric-depth rasters ([`scenegen`],
//! [`render`]), range normalizations for the depth maps ([`depthproc`]),
//! scale-invariant and smoothness objectives with analytic gradients
//! ([`objectives`]), standard depth metrics ([`metrics`]), a small residual
//! network trained with hand-written backprop and ADAM ([`nnet`]), and the
//! dataset / training / evaluation plumbing plus file formats
//! ([`pipeline`]).
//!
//! Everything is deterministic: a seed pins scenes, datasets, parameter
//! initialization and the whole training trajectory, and the data-parallel
//! loops (see the `parallel` feature) produce byte-identical results
//! regardless of worker count.

pub mod depthproc;
pub mod error;
mod exec;
pub mod math;
pub mod metrics;
pub mod nnet;
pub mod objectives;
pub mod pipeline;
pub mod raster;
pub mod render;
pub mod scenegen;

pub use error::{Error, Result};
pub use raster::Raster;
