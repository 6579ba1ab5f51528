//! Dense feed-forward networks with explicit backpropagation.
//!
//! The policy network is one MLP whose output layer is the concatenation of
//! every head (option logits, option-selection logits and, optionally,
//! termination logits), which is exactly a shared trunk with differing output
//! layers. The value network is a separate MLP of the same shape.

mod adamw;
pub mod gradcheck;
mod mlp;
mod policy;

pub use adamw::{AdamW, AdamWConfig};
pub use mlp::{Activations, Init, Mlp, MlpConfig, MlpGrads};
pub use policy::{HeadLayout, PolicyNet, PolicyOutput, ValueNet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid network configuration: {0}")]
    InvalidConfig(&'static str),
}
