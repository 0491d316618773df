//! Group-relative policy optimization.

mod advantage;
mod objective;
mod trainer;

pub use advantage::{group_normalize, group_normalize_with, StdMode};
pub use objective::{
    clip_binds, clipped_surrogate, grpo_gradient, grpo_objective, kl_penalty, GroupBatch, ObjectiveValue,
};
pub use trainer::{sample_groups, select_batch, stream_seed, train_step, StepMetrics};
