//! Per-user chronological token sequences and the leave-one-out split.

use super::vocab::TokenId;
use super::DataError;

/// Leave-one-out markers: most recent action is the test item, the second
/// most recent the validation item, everything before them the train prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Split {
    pub train_end: usize,
    pub validation: usize,
    pub test: usize,
}

pub fn split_leave_one_out(len: usize) -> Result<Split, DataError> {
    if len < 3 {
        return Err(DataError::SplitTooShort { len });
    }
    Ok(Split { train_end: len - 2, validation: len - 2, test: len - 1 })
}

#[derive(Debug, Clone)]
pub struct UserSequence {
    pub user_index: usize,
    /// Opaque user key from the raw log (the index as text once preprocessed).
    pub user_id: String,
    pub tokens: Vec<TokenId>,
    pub split: Split,
}

impl UserSequence {
    pub fn new(user_index: usize, user_id: String, tokens: Vec<TokenId>) -> Result<Self, DataError> {
        let split = split_leave_one_out(tokens.len())?;
        Ok(UserSequence { user_index, user_id, tokens, split })
    }

    pub fn train_tokens(&self) -> &[TokenId] {
        &self.tokens[..self.split.train_end]
    }

    pub fn validation_item(&self) -> TokenId {
        self.tokens[self.split.validation]
    }

    pub fn test_item(&self) -> TokenId {
        self.tokens[self.split.test]
    }

    /// Test-time encoder input: train prefix plus the validation item.
    pub fn eval_input_tokens(&self) -> &[TokenId] {
        &self.tokens[..=self.split.validation]
    }
}
