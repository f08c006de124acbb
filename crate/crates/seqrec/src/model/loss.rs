//! Output heads and the three loss terms.

use super::config::ModelConfig;
use super::encoder::{encode, Phase};
use super::params::ParamVars;
use super::ModelError;
use crate::data::{TokenId, TrainingSample};
use crate::numerics::{Tape, Tensor, VarId};

/// Mask-head logits for encoder rows `h_rows` (`[m, d]`): the dot product
/// against each real item's embedding row plus the output bias. Reserved
/// tokens (PAD/[mask]/[UID]) are outside the softmax support by
/// construction: the head only sees rows `1..=num_items`.
pub fn mask_logits(
    tape: &mut Tape,
    h_rows: VarId,
    vars: &ParamVars,
    num_items: usize,
) -> Result<VarId, ModelError> {
    let real_items = tape.slice_rows(vars.item_embedding(), 1, num_items);
    let logits = tape.matmul_nt(h_rows, real_items)?;
    Ok(tape.add_row_broadcast(logits, vars.output_bias()))
}

/// Mean negative log-likelihood of the true tokens over the masked
/// positions. `h_rows` holds the encoder outputs at exactly those positions.
pub fn mask_loss(
    tape: &mut Tape,
    h_rows: VarId,
    labels: &[TokenId],
    vars: &ParamVars,
    num_items: usize,
) -> Result<VarId, ModelError> {
    if labels.is_empty() {
        return Err(ModelError::NoMaskedPositions);
    }
    for &l in labels {
        if l == 0 || l > num_items {
            return Err(ModelError::TokenOutOfRange { token: l, limit: num_items });
        }
    }
    let logits = mask_logits(tape, h_rows, vars, num_items)?;
    let log_probs = tape.log_softmax(logits, 1)?;
    let picks: Vec<(usize, usize)> = labels.iter().enumerate().map(|(i, &l)| (i, l - 1)).collect();
    let picked = tape.pick_elements(log_probs, &picks);
    let total = tape.sum(picked);
    Ok(tape.scale(total, -1.0 / labels.len() as f64))
}

/// Matching scores against the [UID] representation `h_uid` (`[1, d]`):
/// the positive's dot product, and the mean dot product of the negatives
/// (the sum divided by `n` balances the two sides).
pub fn matching_scores(
    tape: &mut Tape,
    h_uid: VarId,
    positive: TokenId,
    negatives: &[TokenId],
    vars: &ParamVars,
    num_items: usize,
) -> Result<(VarId, VarId), ModelError> {
    if negatives.is_empty() {
        return Err(ModelError::EmptyNegatives);
    }
    for &t in std::iter::once(&positive).chain(negatives) {
        if t == 0 || t > num_items {
            return Err(ModelError::TokenOutOfRange { token: t, limit: num_items });
        }
    }
    let pos_row = tape.gather_rows(vars.item_embedding(), &[positive])?;
    let prod = tape.mul(h_uid, pos_row);
    let score_pos = tape.sum(prod);

    let neg_rows = tape.gather_rows(vars.item_embedding(), negatives)?;
    let dots = tape.matmul_nt(h_uid, neg_rows)?;
    let total = tape.sum(dots);
    let score_neg = tape.scale(total, 1.0 / negatives.len() as f64);
    Ok((score_pos, score_neg))
}

/// Binary cross-entropy over the scaled scores,
/// `-(log sigmoid(c*s_pos) + log(1 - sigmoid(c*s_neg)))`, computed through
/// softplus so both saturation directions stay finite.
pub fn matching_loss(tape: &mut Tape, score_pos: VarId, score_neg: VarId, c: f64) -> VarId {
    let neg_pos = tape.scale(score_pos, -c);
    let pos_term = tape.softplus(neg_pos);
    let scaled_neg = tape.scale(score_neg, c);
    let neg_term = tape.softplus(scaled_neg);
    tape.add(pos_term, neg_term)
}

/// The loss terms present in one sample's forward pass.
pub struct LossTerms {
    pub total: VarId,
    pub mask: Option<VarId>,
    pub matching: Option<VarId>,
}

/// Runs the encoder once and assembles the sample's loss: mask term over its
/// masked positions, matching term from the [UID] output, summed. With
/// `use_matching_task` off every matching term is dropped.
pub fn total_loss(
    tape: &mut Tape,
    vars: &ParamVars,
    sample: &TrainingSample,
    cfg: &ModelConfig,
    num_items: usize,
    phase: &mut Phase,
) -> Result<LossTerms, ModelError> {
    let h = encode(tape, vars, &sample.input_tokens, cfg, num_items, phase)?;

    let mask = if sample.masked_positions.is_empty() {
        None
    } else {
        let positions: Vec<usize> = sample.masked_positions.iter().map(|&(p, _)| p).collect();
        let labels: Vec<TokenId> = sample.masked_positions.iter().map(|&(_, l)| l).collect();
        let rows = tape.gather_rows(h, &positions)?;
        Some(mask_loss(tape, rows, &labels, vars, num_items)?)
    };

    let matching = match &sample.matching {
        Some(part) if cfg.use_matching_task => {
            let h_uid = tape.slice_rows(h, 0, 1);
            let (score_pos, score_neg) =
                matching_scores(tape, h_uid, part.positive, &part.negatives, vars, num_items)?;
            Some(matching_loss(tape, score_pos, score_neg, cfg.matching_scale))
        }
        _ => None,
    };

    let total = match (mask, matching) {
        (Some(a), Some(b)) => tape.add(a, b),
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => tape.constant(Tensor::scalar(0.0)),
    };
    Ok(LossTerms { total, mask, matching })
}
