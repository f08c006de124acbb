//! The bidirectional encoder: embedding sum, stacked Transformer layers, the
//! weight-tied mask head, the [UID]-anchored matching head, and the loss
//! terms that train them.

mod config;
mod encoder;
mod loss;
mod params;

pub use config::ModelConfig;
pub use encoder::{
    embed_input, encode, multi_head_attention, pad_attention_bias, transformer_layer, Phase,
    LAYER_NORM_EPSILON,
};
pub use loss::{mask_logits, mask_loss, matching_loss, matching_scores, total_loss, LossTerms};
pub use params::{LayerVars, ModelParameters, ParamGrads, ParamKind, ParamVars, SlotInfo};

use thiserror::Error;

use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("token {token} out of range: embedding table has {limit} rows")]
    TokenOutOfRange { token: usize, limit: usize },
    #[error("mask loss needs at least one masked position")]
    NoMaskedPositions,
    #[error("matching scores need at least one negative")]
    EmptyNegatives,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
