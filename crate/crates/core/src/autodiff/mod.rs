//! Minimal reverse-mode automatic differentiation over dense f64 tensors.
//!
//! The op set is exactly what the frame-aggregation network and the
//! structure-consistency loss need; everything is 64-bit and single
//! threaded for reproducibility.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod opcheck;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{check_gradients, GradCheck};
pub use graph::{AdError, Graph, TensorId};
pub use tensor::TensorData;
