//! Training-sample production: the three sample kinds, the fixed-length
//! input window, and uniform negative sampling.
//!
//! Masking always covers whole runs of consecutive identical items so a
//! masked item's identity is never readable off an adjacent duplicate. That
//! applies to the last-mask kind too: when the window ends in a duplicate
//! run the entire run is masked, not just the final slot.

use std::collections::HashSet;

use rand::seq::index::sample as index_sample;
use rand::Rng;

use super::sequence::UserSequence;
use super::vocab::{mask_token_for, uid_token_for, TokenId, PAD_TOKEN};
use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    /// Random in-window masks plus the matching triple.
    MaskMatching,
    /// Only the final item (run) masked; no matching part.
    LastMask,
    /// Untouched window with the matching triple only.
    MatchingOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingPart {
    pub positive: TokenId,
    pub negatives: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSample {
    pub kind: SampleKind,
    /// Fixed length `max_len`, always starting with [UID], right-padded.
    pub input_tokens: Vec<TokenId>,
    /// `(position, true token)` pairs, ascending by position.
    pub masked_positions: Vec<(usize, TokenId)>,
    pub matching: Option<MatchingPart>,
}

/// How many samples of each kind to emit per user per epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleMix {
    pub mask_matching: u32,
    pub last_mask: u32,
    pub matching_only: u32,
}

impl Default for SampleMix {
    fn default() -> Self {
        SampleMix { mask_matching: 1, last_mask: 1, matching_only: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct SampleConfig {
    pub max_len: usize,
    pub mask_proportion: f64,
    pub num_negatives: usize,
    pub mix: SampleMix,
    /// Replace the matching positive's input slot with an unlabeled [mask].
    /// Off by default: the positive stays visible in the encoder input.
    pub hide_matching_positive: bool,
}

/// Keeps the most recent `max_len - 1` tokens, prepends [UID], right-pads
/// with PAD to exactly `max_len`.
pub fn truncate_window(tokens: &[TokenId], max_len: usize, num_items: usize) -> Vec<TokenId> {
    assert!(max_len >= 3, "window length must fit UID plus at least two slots");
    let keep = tokens.len().min(max_len - 1);
    let mut window = Vec::with_capacity(max_len);
    window.push(uid_token_for(num_items));
    window.extend_from_slice(&tokens[tokens.len() - keep..]);
    window.resize(max_len, PAD_TOKEN);
    window
}

/// Draws `n` distinct items the user never interacted with, uniformly.
pub fn sample_negatives<R: Rng + ?Sized>(
    seq: &UserSequence,
    num_items: usize,
    n: usize,
    rng: &mut R,
) -> Result<Vec<TokenId>, DataError> {
    let history: HashSet<TokenId> = seq.tokens.iter().copied().collect();
    let available = num_items - history.len();
    if available < n {
        return Err(DataError::NegativePoolTooSmall { needed: n, available });
    }
    // Small pools are enumerated outright; large ones use rejection sampling.
    if available <= 2 * n || available <= 64 {
        let pool: Vec<TokenId> = (1..=num_items).filter(|t| !history.contains(t)).collect();
        let picked = index_sample(rng, pool.len(), n);
        Ok(picked.iter().map(|i| pool[i]).collect())
    } else {
        let mut drawn = HashSet::with_capacity(n);
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let t = rng.random_range(1..=num_items);
            if !history.contains(&t) && drawn.insert(t) {
                out.push(t);
            }
        }
        Ok(out)
    }
}

/// One epoch's worth of samples for one user, per the configured mix.
///
/// Pure in `(sequence, config, rng state)`: callers derive the rng from
/// `(global seed, user index, epoch)` so epochs draw fresh masks and
/// negatives while staying reproducible.
pub fn generate_training_samples<R: Rng + ?Sized>(
    seq: &UserSequence,
    cfg: &SampleConfig,
    num_items: usize,
    rng: &mut R,
) -> Result<Vec<TrainingSample>, DataError> {
    let train = seq.train_tokens();
    assert!(!train.is_empty(), "filtered sequences always have a train prefix");
    let window = truncate_window(train, cfg.max_len, num_items);
    let real_len = train.len().min(cfg.max_len - 1);
    let mask = mask_token_for(num_items);
    let positive = window[real_len];

    let mut out = Vec::new();
    for _ in 0..cfg.mix.mask_matching {
        let masked = random_mask_positions(&window, real_len, cfg.mask_proportion, rng);
        let (input, labels) = apply_masks(&window, &masked, mask);
        let mut input = input;
        if cfg.hide_matching_positive && input[real_len] != mask {
            input[real_len] = mask;
        }
        let negatives = sample_negatives(seq, num_items, cfg.num_negatives, rng)?;
        out.push(TrainingSample {
            kind: SampleKind::MaskMatching,
            input_tokens: input,
            masked_positions: labels,
            matching: Some(MatchingPart { positive, negatives }),
        });
    }
    for _ in 0..cfg.mix.last_mask {
        let run_start = run_start(&window, real_len);
        let masked: Vec<usize> = (run_start..=real_len).collect();
        let (input, labels) = apply_masks(&window, &masked, mask);
        out.push(TrainingSample {
            kind: SampleKind::LastMask,
            input_tokens: input,
            masked_positions: labels,
            matching: None,
        });
    }
    for _ in 0..cfg.mix.matching_only {
        let mut input = window.clone();
        if cfg.hide_matching_positive {
            input[real_len] = mask;
        }
        let negatives = sample_negatives(seq, num_items, cfg.num_negatives, rng)?;
        out.push(TrainingSample {
            kind: SampleKind::MatchingOnly,
            input_tokens: input,
            masked_positions: Vec::new(),
            matching: Some(MatchingPart { positive, negatives }),
        });
    }
    Ok(out)
}

/// Picks `max(1, ceil(rho * len))` anchor positions without replacement and
/// expands each to its whole run of consecutive duplicates. The expansion may
/// exceed the rho budget; the extras are kept.
fn random_mask_positions<R: Rng + ?Sized>(
    window: &[TokenId],
    real_len: usize,
    rho: f64,
    rng: &mut R,
) -> Vec<usize> {
    let anchors = ((rho * real_len as f64).ceil() as usize).max(1).min(real_len);
    let picked = index_sample(rng, real_len, anchors);
    let mut masked = vec![false; window.len()];
    for i in picked.iter() {
        let pos = i + 1; // window slot 0 is [UID]
        let token = window[pos];
        masked[pos] = true;
        let mut left = pos;
        while left > 1 && window[left - 1] == token {
            left -= 1;
            masked[left] = true;
        }
        let mut right = pos;
        while right < real_len && window[right + 1] == token {
            right += 1;
            masked[right] = true;
        }
    }
    (1..=real_len).filter(|&p| masked[p]).collect()
}

/// First slot of the duplicate run ending at `real_len`.
fn run_start(window: &[TokenId], real_len: usize) -> usize {
    let token = window[real_len];
    let mut start = real_len;
    while start > 1 && window[start - 1] == token {
        start -= 1;
    }
    start
}

fn apply_masks(
    window: &[TokenId],
    positions: &[usize],
    mask: TokenId,
) -> (Vec<TokenId>, Vec<(usize, TokenId)>) {
    let mut input = window.to_vec();
    let mut labels = Vec::with_capacity(positions.len());
    for &p in positions {
        labels.push((p, window[p]));
        input[p] = mask;
    }
    (input, labels)
}
