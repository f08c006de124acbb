//! Raw interaction logs to processed sequences.
//!
//! Ratings/reviews are collapsed to implicit feedback, records are grouped by
//! user and ordered by timestamp (stable: ties keep input order), and users
//! and items with fewer than five interactions are removed iteratively until
//! both counts hold at once.

use std::collections::{HashMap, HashSet};

use super::sequence::UserSequence;
use super::vocab::Vocabulary;
use super::DataError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RawInteraction {
    pub user_id: String,
    pub item_id: String,
    /// Epoch seconds; never negative.
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetStats {
    pub num_users: usize,
    pub num_items: usize,
    pub num_actions: usize,
    pub avg_length: f64,
}

#[derive(Debug, Clone)]
pub struct ProcessedDataset {
    pub vocabulary: Vocabulary,
    pub sequences: Vec<UserSequence>,
    pub stats: DatasetStats,
}

const MIN_FEEDBACK: usize = 5;

pub fn preprocess(raw: &[RawInteraction]) -> Result<ProcessedDataset, DataError> {
    // Implicit-feedback collapse: exact duplicate rows count once.
    let mut seen = HashSet::new();
    let mut rows: Vec<&RawInteraction> = Vec::with_capacity(raw.len());
    for r in raw {
        debug_assert!(r.timestamp >= 0, "timestamps are epoch seconds");
        if seen.insert((r.user_id.as_str(), r.item_id.as_str(), r.timestamp)) {
            rows.push(r);
        }
    }

    // Iterative >=5 filter: removing an item can sink a user below the
    // threshold and vice versa, so repeat until a full pass removes nothing.
    loop {
        let mut user_counts: HashMap<&str, usize> = HashMap::new();
        let mut item_counts: HashMap<&str, usize> = HashMap::new();
        for r in &rows {
            *user_counts.entry(r.user_id.as_str()).or_default() += 1;
            *item_counts.entry(r.item_id.as_str()).or_default() += 1;
        }
        let before = rows.len();
        rows.retain(|r| {
            user_counts[r.user_id.as_str()] >= MIN_FEEDBACK
                && item_counts[r.item_id.as_str()] >= MIN_FEEDBACK
        });
        if rows.len() == before {
            break;
        }
    }
    if rows.is_empty() {
        return Err(DataError::Degenerate);
    }

    // Group by user in first-appearance order; the per-user lists inherit the
    // input order, so a stable sort on timestamp keeps ties in file order.
    let mut user_order: Vec<&str> = Vec::new();
    let mut by_user: HashMap<&str, Vec<&RawInteraction>> = HashMap::new();
    for r in &rows {
        by_user.entry(r.user_id.as_str()).or_insert_with(|| {
            user_order.push(r.user_id.as_str());
            Vec::new()
        });
        by_user.get_mut(r.user_id.as_str()).unwrap().push(r);
    }
    for list in by_user.values_mut() {
        list.sort_by_key(|r| r.timestamp);
    }

    // Token ids by first appearance in the chronologically ordered stream.
    let mut vocabulary = Vocabulary::new();
    let mut sequences = Vec::with_capacity(user_order.len());
    let mut num_actions = 0;
    for (user_index, user) in user_order.iter().enumerate() {
        let tokens: Vec<usize> = by_user[user]
            .iter()
            .map(|r| vocabulary.intern(&r.item_id))
            .collect();
        num_actions += tokens.len();
        sequences.push(UserSequence::new(user_index, user.to_string(), tokens)?);
    }

    let stats = DatasetStats {
        num_users: sequences.len(),
        num_items: vocabulary.num_items(),
        num_actions,
        avg_length: num_actions as f64 / sequences.len() as f64,
    };
    Ok(ProcessedDataset { vocabulary, sequences, stats })
}
