//! Reward shaping, GRPO training and pairwise evaluation for long-form
//! text generation, with a tabular toy policy standing in for the model.

pub mod arena;
pub mod config;
pub mod error;
pub mod grpo;
pub mod io;
pub mod judge;
pub mod policy;
pub mod registry;
pub mod rewards;
pub mod structure;
pub mod synthetic;
pub mod text;
pub mod types;

pub use config::{load_config, ConfigOverrides, TrainConfig};
pub use error::{Error, Result};
pub use types::{AdvantageVector, LengthSpec, PromptSpec, RewardVector, Trajectory, WordRange};
