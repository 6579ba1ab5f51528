//! Replay buffer, distillation losses, and the synchronous trainer.

mod buffer;
mod loss;
mod trainer;

pub use buffer::{Boundary, BufferEntry, ReplayBuffer, Segment};
pub use loss::{
    exact_ce_loss, mean_ce_loss, mean_ce_loss_with_actions, optit_loss, optit_loss_with_actions, policy_loss, value_loss,
    LossBatch, LossOutput, LossVariant,
};
pub(crate) use loss::heads_of;
pub use trainer::*;
