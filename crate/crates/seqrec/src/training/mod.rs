//! Mini-batch Adam training over the mixed sample stream, with deterministic
//! seeding and bit-exact checkpointing.

mod adam;
mod checkpoint;
mod epoch;

pub use adam::{adam_step, OptimizerState, ADAM_EPSILON};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use epoch::{train_epoch, EpochStats};

use thiserror::Error;

use crate::data::{DataError, SampleMix};
use crate::model::ModelError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite gradient in parameter group {slot}")]
    NonFiniteGradient { slot: String },
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("not a checkpoint file: bad magic")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },
    #[error("vocabulary digest mismatch: checkpoint has {stored}, current vocabulary is {actual}")]
    DigestMismatch { stored: String, actual: String },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Classic L2 penalty added to the gradient of every weight matrix
    /// (embeddings and projections; never biases or layer-norm terms).
    pub l2_coefficient: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub global_seed: u64,
    pub sample_mix: SampleMix,
    pub hide_matching_positive: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            l2_coefficient: 0.0,
            batch_size: 32,
            epochs: 10,
            global_seed: 42,
            sample_mix: SampleMix::default(),
            hide_matching_positive: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.learning_rate <= 0.0 {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return bad(format!("{name} {b} outside (0,1)"));
            }
        }
        if self.l2_coefficient < 0.0 {
            return bad(format!("l2_coefficient {} negative", self.l2_coefficient));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        let m = self.sample_mix;
        if m.mask_matching + m.last_mask + m.matching_only == 0 {
            return bad("sample mix emits nothing".into());
        }
        Ok(())
    }
}
