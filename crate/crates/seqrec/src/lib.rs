//! Sequential recommendation engine: a bidirectional Transformer encoder
//! trained jointly on masked-item prediction and a [UID]-anchored user-item
//! matching task, with preprocessing, Adam training, checkpointing and a
//! leave-one-out ranking harness.
//!
//! Module map:
//! - [`numerics`]: dense tensors, tape-based reverse-mode autodiff, gradient checking
//! - [`data`]: raw-log preprocessing, vocabulary, leave-one-out splits, training samples
//! - [`model`]: encoder forward pass, mask head, matching head, loss terms
//! - [`training`]: Adam, epoch loop, binary checkpoints
//! - [`evaluation`]: HR/NDCG/MRR harness, POP baseline, correlation matrix export

pub mod data;
pub mod evaluation;
pub mod model;
pub mod numerics;
pub mod seeding;
pub mod training;
