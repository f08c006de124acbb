//! Encoder forward pass on a tape: embedding sum, pre-norm residual
//! Transformer layers with PAD-masked attention, and a final stabilizing
//! normalization.

use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::params::{LayerVars, ParamVars};
use super::ModelError;
use crate::data::{table_rows_for, uid_token_for, TokenId, PAD_TOKEN};
use crate::numerics::{Tape, Tensor, VarId};

pub const LAYER_NORM_EPSILON: f64 = 1e-12;

/// Additive pre-softmax score for attention into PAD slots. Large enough
/// that the post-softmax weight underflows to exactly zero.
const PAD_ATTENTION_SCORE: f64 = -1e30;

/// Train mode applies inverted dropout from the supplied stream; eval mode
/// is deterministic and dropout-free.
pub enum Phase<'r> {
    Train { rng: &'r mut ChaCha8Rng },
    Eval,
}

fn maybe_dropout(tape: &mut Tape, x: VarId, cfg: &ModelConfig, phase: &mut Phase) -> VarId {
    match phase {
        Phase::Train { rng } if cfg.dropout_rate > 0.0 => tape.dropout(x, cfg.dropout_rate, *rng),
        _ => x,
    }
}

/// Item rows plus (optionally) the position table, with train-time dropout.
pub fn embed_input(
    tape: &mut Tape,
    vars: &ParamVars,
    tokens: &[TokenId],
    cfg: &ModelConfig,
    num_items: usize,
    phase: &mut Phase,
) -> Result<VarId, ModelError> {
    assert_eq!(tokens.len(), cfg.max_len, "input must be a full window");
    assert_eq!(tokens[0], uid_token_for(num_items), "window must start with [UID]");
    let limit = table_rows_for(num_items);
    for &t in tokens {
        if t >= limit {
            return Err(ModelError::TokenOutOfRange { token: t, limit });
        }
    }
    let mut x = tape.gather_rows(vars.item_embedding(), tokens)?;
    if cfg.use_position_embedding {
        x = tape.add(x, vars.position_embedding());
    }
    Ok(maybe_dropout(tape, x, cfg, phase))
}

/// Per-column additive attention bias: 0 on real slots, a huge negative
/// score on PAD slots.
pub fn pad_attention_bias(tape: &mut Tape, tokens: &[TokenId]) -> VarId {
    let bias: Vec<f64> = tokens
        .iter()
        .map(|&t| if t == PAD_TOKEN { PAD_ATTENTION_SCORE } else { 0.0 })
        .collect();
    tape.constant(Tensor::vector(bias))
}

/// Scaled dot-product self-attention over `h` column-sliced heads.
/// Returns the projected output and each head's post-softmax weights.
pub fn multi_head_attention(
    tape: &mut Tape,
    x: VarId,
    layer: &LayerVars,
    pad_bias: VarId,
    cfg: &ModelConfig,
) -> Result<(VarId, Vec<VarId>), ModelError> {
    let q = tape.matmul(x, layer.w_q)?;
    let k = tape.matmul(x, layer.w_k)?;
    let v = tape.matmul(x, layer.w_v)?;

    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(cfg.num_heads);
    let mut attentions = Vec::with_capacity(cfg.num_heads);
    for h in 0..cfg.num_heads {
        let qh = tape.slice_cols(q, h * dh, dh);
        let kh = tape.slice_cols(k, h * dh, dh);
        let vh = tape.slice_cols(v, h * dh, dh);
        let scores = tape.matmul_nt(qh, kh)?;
        let scores = tape.scale(scores, scale);
        let scores = tape.add_row_broadcast(scores, pad_bias);
        let attn = tape.softmax(scores, 1)?;
        attentions.push(attn);
        heads.push(tape.matmul(attn, vh)?);
    }
    let concat = tape.concat_cols(&heads);
    let out = tape.matmul(concat, layer.w_o)?;
    Ok((out, attentions))
}

/// One pre-norm residual block: `x + Dropout(g(LayerNorm(x)))` for the
/// attention sublayer, then again for the feed-forward sublayer.
pub fn transformer_layer(
    tape: &mut Tape,
    x: VarId,
    layer: &LayerVars,
    pad_bias: VarId,
    cfg: &ModelConfig,
    phase: &mut Phase,
) -> Result<VarId, ModelError> {
    let ln1 = tape.layer_norm(x, layer.ln1_gain, layer.ln1_shift, LAYER_NORM_EPSILON);
    let (attn, _) = multi_head_attention(tape, ln1, layer, pad_bias, cfg)?;
    let attn = maybe_dropout(tape, attn, cfg, phase);
    let x = tape.add(x, attn);

    let ln2 = tape.layer_norm(x, layer.ln2_gain, layer.ln2_shift, LAYER_NORM_EPSILON);
    let inner = tape.matmul(ln2, layer.w_ff1)?;
    let inner = tape.gelu(inner);
    let ffn = tape.matmul(inner, layer.w_ff2)?;
    let ffn = maybe_dropout(tape, ffn, cfg, phase);
    Ok(tape.add(x, ffn))
}

/// Full encoder: embedding, `L` Transformer layers, and a final
/// parameter-free layer norm for output stability.
pub fn encode(
    tape: &mut Tape,
    vars: &ParamVars,
    tokens: &[TokenId],
    cfg: &ModelConfig,
    num_items: usize,
    phase: &mut Phase,
) -> Result<VarId, ModelError> {
    let mut x = embed_input(tape, vars, tokens, cfg, num_items, phase)?;
    let pad_bias = pad_attention_bias(tape, tokens);
    for l in 0..cfg.num_layers {
        x = transformer_layer(tape, x, &vars.layer(l), pad_bias, cfg, phase)?;
    }
    let gain = tape.constant(Tensor::full(vec![cfg.hidden_size], 1.0));
    let shift = tape.constant(Tensor::zeros(vec![cfg.hidden_size]));
    Ok(tape.layer_norm(x, gain, shift, LAYER_NORM_EPSILON))
}
