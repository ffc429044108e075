//! Tree tensor network Born machines.

pub mod checkpoint;
pub mod data;
pub mod error;
pub mod factor_graph;
pub mod model;
pub mod mps;
pub mod network;
pub mod sample;
pub mod scalar;
pub mod tensor;
pub mod train;
pub mod ttn;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use model::{BornModel, ModelKind};
pub use network::{Amplitude, Density, Leg, NodeId, TreeNetwork};
pub use scalar::Scalar;
pub use tensor::DenseTensor;

/// Double-precision model, the default everywhere tolerances matter.
pub type Model = BornModel<f64>;
pub type Network = TreeNetwork<f64>;
pub type Tensor = DenseTensor<f64>;
