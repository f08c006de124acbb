//! One training epoch: regenerate samples, shuffle, batch, step.

use rand::seq::SliceRandom;

use super::adam::{adam_step, OptimizerState};
use super::{TrainConfig, TrainError};
use crate::data::{generate_training_samples, TrainingSample, UserSequence};
use crate::model::{total_loss, ModelConfig, ModelParameters, ParamGrads, Phase};
use crate::numerics::Tape;
use crate::seeding::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: u64,
    /// Mean of each sample's total loss.
    pub mean_total_loss: f64,
    /// Mean over the samples that carry a mask term.
    pub mean_mask_loss: f64,
    /// Mean over the samples that carry a matching term.
    pub mean_matching_loss: f64,
    pub num_samples: usize,
    pub num_batches: usize,
}

/// Regenerates this epoch's samples (fresh masks and negatives), shuffles
/// them, and applies one Adam step per batch of averaged gradients.
///
/// Every random draw is keyed by `(global_seed, ..., epoch)`, so the epoch is
/// a pure function of its inputs: rerunning it, or resuming from a
/// checkpoint, reproduces the same trajectory bit for bit.
pub fn train_epoch(
    sequences: &[UserSequence],
    params: &mut ModelParameters,
    state: &mut OptimizerState,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    epoch: u64,
) -> Result<EpochStats, TrainError> {
    assert!(!sequences.is_empty(), "training needs at least one sequence");
    train_cfg.validate()?;
    let num_items = params.num_items();
    let sample_cfg =
        model_cfg.sample_config(train_cfg.sample_mix, train_cfg.hide_matching_positive);

    let mut samples: Vec<TrainingSample> = Vec::new();
    for seq in sequences {
        let mut rng = stream_rng(
            train_cfg.global_seed,
            Stream::Samples,
            seq.user_index as u64,
            epoch,
        );
        samples.extend(generate_training_samples(seq, &sample_cfg, num_items, &mut rng)?);
    }
    let mut shuffle_rng = stream_rng(train_cfg.global_seed, Stream::Shuffle, 0, epoch);
    samples.shuffle(&mut shuffle_rng);

    let mut dropout_rng = stream_rng(train_cfg.global_seed, Stream::Dropout, 0, epoch);
    let mut total_sum = 0.0;
    let mut mask_sum = 0.0;
    let mut mask_count = 0usize;
    let mut matching_sum = 0.0;
    let mut matching_count = 0usize;
    let mut num_batches = 0usize;

    for batch in samples.chunks(train_cfg.batch_size) {
        let mut grads = ParamGrads::zeros_like(params);
        for sample in batch {
            let mut tape = Tape::new();
            let vars = params.bind(&mut tape);
            let terms = total_loss(
                &mut tape,
                &vars,
                sample,
                model_cfg,
                num_items,
                &mut Phase::Train { rng: &mut dropout_rng },
            )?;
            total_sum += tape.value(terms.total).item();
            if let Some(id) = terms.mask {
                mask_sum += tape.value(id).item();
                mask_count += 1;
            }
            if let Some(id) = terms.matching {
                matching_sum += tape.value(id).item();
                matching_count += 1;
            }
            let sample_grads = tape.backward(terms.total)?;
            grads.accumulate(&vars, &sample_grads);
        }
        grads.scale(1.0 / batch.len() as f64);
        adam_step(params, &grads, state, train_cfg)?;
        num_batches += 1;
    }

    Ok(EpochStats {
        epoch,
        mean_total_loss: total_sum / samples.len() as f64,
        mean_mask_loss: mask_sum / mask_count.max(1) as f64,
        mean_matching_loss: matching_sum / matching_count.max(1) as f64,
        num_samples: samples.len(),
        num_batches,
    })
}
