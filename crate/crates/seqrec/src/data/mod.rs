//! Turning raw `(user, item, timestamp)` logs into vocabulary-indexed
//! sequences, leave-one-out splits, and training samples.

mod io;
mod preprocess;
mod samples;
mod sequence;
mod vocab;

pub use io::{read_processed, read_raw_interactions, read_stats, write_processed, write_stats};
pub use preprocess::{preprocess, DatasetStats, ProcessedDataset, RawInteraction};
pub use samples::{
    generate_training_samples, sample_negatives, truncate_window, MatchingPart, SampleConfig,
    SampleKind, SampleMix, TrainingSample,
};
pub use sequence::{split_leave_one_out, Split, UserSequence};
pub use vocab::{mask_token_for, table_rows_for, uid_token_for, TokenId, Vocabulary, PAD_TOKEN};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset degenerate: no users or items survive the >=5 interaction filter")]
    Degenerate,
    #[error("cannot split a sequence of length {len}: need at least 3 interactions")]
    SplitTooShort { len: usize },
    #[error(
        "negative sampling needs {needed} items but only {available} are outside the user's history"
    )]
    NegativePoolTooSmall { needed: usize, available: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("token {token} out of range for vocabulary of {num_items} items")]
    TokenOutOfRange { token: usize, num_items: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
