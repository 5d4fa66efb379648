//! From-scratch multilayer perceptron: dense layers, batch normalization,
//! inverted dropout, ReLU, exact reverse-mode gradients, Adam, and a
//! reduce-on-plateau learning rate scheduler.

pub mod adam;
pub mod mlp;
pub mod scheduler;

pub use adam::AdamState;
pub use mlp::{DropoutMasks, ForwardCache, MlpConfig, MlpGrads, MlpParams};
pub use scheduler::PlateauScheduler;
