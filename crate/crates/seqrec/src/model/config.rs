//! Model hyperparameters.

use super::ModelError;
use crate::data::{SampleConfig, SampleMix};

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Hidden size `d`.
    pub hidden_size: usize,
    /// Transformer layer count `L`.
    pub num_layers: usize,
    /// Attention head count `h`; must divide `hidden_size`.
    pub num_heads: usize,
    /// Fixed input length `N`, counting the leading [UID] slot.
    pub max_len: usize,
    /// Mask proportion `rho` over the window's real items.
    pub mask_proportion: f64,
    /// Matching negatives `n` per sample.
    pub num_negatives: usize,
    pub dropout_rate: f64,
    /// Matching-score scale `c` inside the binary cross-entropy.
    pub matching_scale: f64,
    pub use_position_embedding: bool,
    pub use_matching_task: bool,
    /// Feed-forward inner width as a multiple of `hidden_size`.
    pub ffn_multiplier: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 32,
            num_layers: 2,
            num_heads: 2,
            max_len: 50,
            mask_proportion: 0.6,
            num_negatives: 10,
            dropout_rate: 0.1,
            matching_scale: 10.0,
            use_position_embedding: true,
            use_matching_task: true,
            ffn_multiplier: 4,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.hidden_size == 0 || self.num_layers == 0 || self.num_heads == 0 {
            return bad("hidden_size, num_layers and num_heads must be positive".into());
        }
        if self.hidden_size % self.num_heads != 0 {
            return bad(format!(
                "hidden_size {} not divisible by num_heads {}",
                self.hidden_size, self.num_heads
            ));
        }
        if self.max_len < 3 {
            return bad(format!("max_len {} too small: need UID plus two slots", self.max_len));
        }
        if !(self.mask_proportion > 0.0 && self.mask_proportion < 1.0) {
            return bad(format!("mask_proportion {} outside (0,1)", self.mask_proportion));
        }
        if self.matching_scale <= 0.0 {
            return bad(format!("matching_scale {} must be positive", self.matching_scale));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0,1)", self.dropout_rate));
        }
        if self.num_negatives == 0 {
            return bad("num_negatives must be positive".into());
        }
        if self.ffn_multiplier == 0 {
            return bad("ffn_multiplier must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    pub fn ffn_width(&self) -> usize {
        self.hidden_size * self.ffn_multiplier
    }

    /// Sample-generation view of this config.
    pub fn sample_config(&self, mix: SampleMix, hide_matching_positive: bool) -> SampleConfig {
        SampleConfig {
            max_len: self.max_len,
            mask_proportion: self.mask_proportion,
            num_negatives: self.num_negatives,
            mix,
            hide_matching_positive,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_fields() {
        assert!(ModelConfig::default().validate().is_ok());
        let mut c = ModelConfig::default();
        c.num_heads = 3; // 32 % 3 != 0
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.max_len = 2;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.mask_proportion = 1.0;
        assert!(c.validate().is_err());
        let mut c = ModelConfig::default();
        c.matching_scale = 0.0;
        assert!(c.validate().is_err());
    }
}
