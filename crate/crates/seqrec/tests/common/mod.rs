//! Synthetic corpora shared by the integration and acceptance suites.
#![allow(dead_code)] // each test binary uses a different subset

use seqrec::data::{TokenId, UserSequence};
use seqrec::model::ModelConfig;

/// Memorizable corpus: user `u` walks the catalog cyclically with stride
/// `1 + u % 3` from start `u % num_items`. Every next item is a
/// deterministic function of the visible window, so a working model can
/// drive held-out error to zero.
pub fn memorizable_corpus(num_users: usize, num_items: usize, seq_len: usize) -> Vec<UserSequence> {
    (0..num_users)
        .map(|u| {
            let start = u % num_items;
            let stride = 1 + u % 3;
            let tokens: Vec<TokenId> = (0..seq_len)
                .map(|t| 1 + (start + t * stride) % num_items)
                .collect();
            UserSequence::new(u, u.to_string(), tokens).unwrap()
        })
        .collect()
}

/// Model sized for the memorizable corpus. `max_len` of 9 keeps the
/// training window and the trailing-mask prediction input the same shape,
/// so every position the evaluator touches is also trained.
pub fn memorizable_model_config() -> ModelConfig {
    ModelConfig {
        hidden_size: 32,
        num_layers: 2,
        num_heads: 2,
        max_len: 9,
        mask_proportion: 0.4,
        num_negatives: 5,
        dropout_rate: 0.0,
        matching_scale: 10.0,
        use_position_embedding: true,
        use_matching_task: true,
        ffn_multiplier: 4,
    }
}

/// Sparse short-sequence corpus for the ablation comparison: each user
/// rotates through a small preference cluster, so ranking the held-out item
/// well requires inferring the user's cluster from very little context.
pub fn clustered_corpus(
    num_users: usize,
    num_clusters: usize,
    cluster_size: usize,
    seq_len: usize,
) -> Vec<UserSequence> {
    (0..num_users)
        .map(|u| {
            let cluster = u % num_clusters;
            let base = cluster * cluster_size;
            let tokens: Vec<TokenId> = (0..seq_len)
                .map(|t| 1 + base + (u / num_clusters + t) % cluster_size)
                .collect();
            UserSequence::new(u, u.to_string(), tokens).unwrap()
        })
        .collect()
}
