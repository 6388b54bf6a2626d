//! Minimal neural-network machinery: a differentiation tape over batch
//! tensors, convolution lowering and first-order optimizers.

pub mod conv;
pub mod optim;
pub mod tape;

pub use conv::ConvGeom;
pub use optim::{Optimizer, OptimizerKind};
pub use tape::{Activation, BatchStats, Gradients, NodeId, NormGroup, Tape};
