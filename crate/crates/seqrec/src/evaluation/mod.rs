//! Leave-one-out ranking evaluation: HR@k / NDCG@k / MRR over sampled
//! candidates, a popularity baseline, and the position-correlation export.

mod correlation;
mod harness;
mod metrics;

pub use correlation::{correlation_matrix, format_correlation_grid};
pub use harness::{
    build_eval_input, evaluate, pop_baseline, score_candidates, CandidateScores, EvalTarget,
};
pub use metrics::{compute_metrics, format_metrics_report, rank_of_truth, RankingMetrics};

use thiserror::Error;

use crate::data::DataError;
use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub k: usize,
    pub num_negatives: usize,
    pub eval_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { k: 10, num_negatives: 100, eval_seed: 12345 }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.k == 0 || self.num_negatives == 0 {
            return Err(EvalError::InvalidConfig(
                "k and num_negatives must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid eval config: {0}")]
    InvalidConfig(String),
    #[error("only {found} users qualify; need at least {needed}")]
    TooFewQualifyingUsers { found: usize, needed: usize },
    #[error("failed to build evaluation thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
