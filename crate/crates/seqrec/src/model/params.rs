//! Learnable parameters, their canonical slot order, and tape binding.
//!
//! Slot order is the single source of truth shared by gradient extraction,
//! optimizer moments and checkpoint serialization:
//! `[item_embedding, position_embedding, (w_q w_k w_v w_o w_ff1 w_ff2
//! ln1_gain ln1_shift ln2_gain ln2_shift) x L, output_bias]`.
//!
//! The mask head owns no projection of its own: its logits reuse the item
//! embedding rows, and `output_bias` is its only extra parameter. The PAD
//! embedding row is zero at init and stays frozen during training.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::ModelError;
use crate::data::table_rows_for;
use crate::numerics::{Gradients, Tape, Tensor, VarId};

/// Init draws stay within this magnitude (truncated normal, two sigma).
pub const INIT_RANGE: f64 = 0.02;

const SLOTS_PER_LAYER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Embedding,
    Projection,
    LayerNormGain,
    LayerNormShift,
    Bias,
}

impl ParamKind {
    /// L2 regularization touches weight matrices only.
    pub fn is_weight_matrix(self) -> bool {
        matches!(self, ParamKind::Embedding | ParamKind::Projection)
    }
}

#[derive(Debug, Clone)]
pub struct SlotInfo {
    pub name: String,
    pub kind: ParamKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    num_items: usize,
    hidden_size: usize,
    max_len: usize,
    num_layers: usize,
    ffn_multiplier: usize,
    slots: Vec<Tensor>,
}

/// Per-layer tape handles.
#[derive(Debug, Clone, Copy)]
pub struct LayerVars {
    pub w_q: VarId,
    pub w_k: VarId,
    pub w_v: VarId,
    pub w_o: VarId,
    pub w_ff1: VarId,
    pub w_ff2: VarId,
    pub ln1_gain: VarId,
    pub ln1_shift: VarId,
    pub ln2_gain: VarId,
    pub ln2_shift: VarId,
}

/// All parameters registered as leaves on one tape, in slot order.
#[derive(Debug, Clone)]
pub struct ParamVars {
    ids: Vec<VarId>,
    num_layers: usize,
}

impl ParamVars {
    pub fn item_embedding(&self) -> VarId {
        self.ids[0]
    }

    pub fn position_embedding(&self) -> VarId {
        self.ids[1]
    }

    pub fn layer(&self, l: usize) -> LayerVars {
        assert!(l < self.num_layers, "layer {l} out of range");
        let b = 2 + l * SLOTS_PER_LAYER;
        LayerVars {
            w_q: self.ids[b],
            w_k: self.ids[b + 1],
            w_v: self.ids[b + 2],
            w_o: self.ids[b + 3],
            w_ff1: self.ids[b + 4],
            w_ff2: self.ids[b + 5],
            ln1_gain: self.ids[b + 6],
            ln1_shift: self.ids[b + 7],
            ln2_gain: self.ids[b + 8],
            ln2_shift: self.ids[b + 9],
        }
    }

    pub fn output_bias(&self) -> VarId {
        *self.ids.last().expect("slots never empty")
    }
}

impl ModelParameters {
    /// Draws all weights from a truncated normal confined to
    /// `[-INIT_RANGE, INIT_RANGE]`; biases and layer-norm shifts start at
    /// zero, layer-norm gains at one, and the PAD embedding row at zero.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, num_items: usize, rng: &mut R) -> Self {
        config.validate().expect("init on validated config");
        assert!(num_items > 0, "empty vocabulary");
        let d = config.hidden_size;
        let f = config.ffn_width();
        let normal = Normal::new(0.0, INIT_RANGE / 2.0).expect("positive sigma");
        let mut draw = |shape: Vec<usize>| {
            let len = shape.iter().product();
            let data = (0..len)
                .map(|_| loop {
                    let x = normal.sample(rng);
                    if x.abs() <= INIT_RANGE {
                        break x;
                    }
                })
                .collect();
            Tensor::new(shape, data).expect("init shape")
        };

        let mut slots = Vec::with_capacity(3 + config.num_layers * SLOTS_PER_LAYER);
        let mut item_embedding = draw(vec![table_rows_for(num_items), d]);
        item_embedding.data_mut()[..d].fill(0.0); // PAD row
        slots.push(item_embedding);
        slots.push(draw(vec![config.max_len, d]));
        for _ in 0..config.num_layers {
            slots.push(draw(vec![d, d])); // w_q
            slots.push(draw(vec![d, d])); // w_k
            slots.push(draw(vec![d, d])); // w_v
            slots.push(draw(vec![d, d])); // w_o
            slots.push(draw(vec![d, f])); // w_ff1
            slots.push(draw(vec![f, d])); // w_ff2
            slots.push(Tensor::full(vec![d], 1.0)); // ln1_gain
            slots.push(Tensor::zeros(vec![d])); // ln1_shift
            slots.push(Tensor::full(vec![d], 1.0)); // ln2_gain
            slots.push(Tensor::zeros(vec![d])); // ln2_shift
        }
        slots.push(Tensor::zeros(vec![num_items])); // output_bias

        ModelParameters {
            num_items,
            hidden_size: d,
            max_len: config.max_len,
            num_layers: config.num_layers,
            ffn_multiplier: config.ffn_multiplier,
            slots,
        }
    }

    /// Rebuilds parameters from slots in canonical order (checkpoint load),
    /// validating every shape against the declared dimensions.
    pub fn from_slots(
        num_items: usize,
        hidden_size: usize,
        max_len: usize,
        num_layers: usize,
        ffn_multiplier: usize,
        slots: Vec<Tensor>,
    ) -> Result<Self, ModelError> {
        let expected = expected_slot_shapes(num_items, hidden_size, max_len, num_layers, ffn_multiplier);
        if slots.len() != expected.len() {
            return Err(ModelError::InvalidConfig(format!(
                "expected {} parameter slots, got {}",
                expected.len(),
                slots.len()
            )));
        }
        let params = ModelParameters {
            num_items,
            hidden_size,
            max_len,
            num_layers,
            ffn_multiplier,
            slots,
        };
        for (i, shape) in expected.iter().enumerate() {
            if params.slots[i].shape() != shape.as_slice() {
                return Err(ModelError::InvalidConfig(format!(
                    "slot {} has shape {:?}, expected {:?}",
                    params.slot_info(i).name,
                    params.slots[i].shape(),
                    shape
                )));
            }
        }
        Ok(params)
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn ffn_multiplier(&self) -> usize {
        self.ffn_multiplier
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn slot(&self, i: usize) -> &Tensor {
        &self.slots[i]
    }

    pub fn slot_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.slots[i]
    }

    pub fn set_slot(&mut self, i: usize, t: Tensor) {
        assert_eq!(t.shape(), self.slots[i].shape(), "slot shape mismatch");
        self.slots[i] = t;
    }

    pub fn item_embedding(&self) -> &Tensor {
        &self.slots[0]
    }

    pub fn output_bias(&self) -> &Tensor {
        self.slots.last().expect("slots never empty")
    }

    pub fn slot_info(&self, i: usize) -> SlotInfo {
        use ParamKind::*;
        if i == 0 {
            return SlotInfo { name: "item_embedding".into(), kind: Embedding };
        }
        if i == 1 {
            return SlotInfo { name: "position_embedding".into(), kind: Embedding };
        }
        if i == self.slots.len() - 1 {
            return SlotInfo { name: "output_bias".into(), kind: Bias };
        }
        let l = (i - 2) / SLOTS_PER_LAYER;
        let (field, kind) = match (i - 2) % SLOTS_PER_LAYER {
            0 => ("w_q", Projection),
            1 => ("w_k", Projection),
            2 => ("w_v", Projection),
            3 => ("w_o", Projection),
            4 => ("w_ff1", Projection),
            5 => ("w_ff2", Projection),
            6 => ("ln1_gain", LayerNormGain),
            7 => ("ln1_shift", LayerNormShift),
            8 => ("ln2_gain", LayerNormGain),
            _ => ("ln2_shift", LayerNormShift),
        };
        SlotInfo { name: format!("layer{l}.{field}"), kind }
    }

    /// Exact count of learnable scalars; the frozen PAD row is excluded.
    pub fn parameter_count(&self) -> usize {
        let total: usize = self.slots.iter().map(|t| t.len()).sum();
        total - self.hidden_size
    }

    /// Registers every slot as a grad-tracked leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> ParamVars {
        let ids = self
            .slots
            .iter()
            .map(|t| tape.input(t.clone().with_grad()))
            .collect();
        ParamVars { ids, num_layers: self.num_layers }
    }

    /// Registers every slot without gradient tracking (evaluation).
    pub fn bind_frozen(&self, tape: &mut Tape) -> ParamVars {
        let ids = self.slots.iter().map(|t| tape.constant(t.clone())).collect();
        ParamVars { ids, num_layers: self.num_layers }
    }
}

fn expected_slot_shapes(
    num_items: usize,
    d: usize,
    max_len: usize,
    num_layers: usize,
    ffn_multiplier: usize,
) -> Vec<Vec<usize>> {
    let f = d * ffn_multiplier;
    let mut shapes = Vec::with_capacity(3 + num_layers * SLOTS_PER_LAYER);
    shapes.push(vec![table_rows_for(num_items), d]);
    shapes.push(vec![max_len, d]);
    for _ in 0..num_layers {
        shapes.push(vec![d, d]);
        shapes.push(vec![d, d]);
        shapes.push(vec![d, d]);
        shapes.push(vec![d, d]);
        shapes.push(vec![d, f]);
        shapes.push(vec![f, d]);
        shapes.push(vec![d]);
        shapes.push(vec![d]);
        shapes.push(vec![d]);
        shapes.push(vec![d]);
    }
    shapes.push(vec![num_items]);
    shapes
}

/// Per-slot gradient accumulator mirroring the parameter shapes.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    slots: Vec<Tensor>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ModelParameters) -> Self {
        ParamGrads {
            slots: params
                .slots
                .iter()
                .map(|t| Tensor::zeros(t.shape().to_vec()))
                .collect(),
        }
    }

    pub fn slot(&self, i: usize) -> &Tensor {
        &self.slots[i]
    }

    pub fn slot_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.slots[i]
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Adds one backward pass's gradients (missing entries count as zero).
    pub fn accumulate(&mut self, binding: &ParamVars, grads: &Gradients) {
        for (slot, &id) in self.slots.iter_mut().zip(&binding.ids) {
            if let Some(g) = grads.get(id) {
                for (acc, v) in slot.data_mut().iter_mut().zip(g.data()) {
                    *acc += v;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for slot in &mut self.slots {
            for v in slot.data_mut() {
                *v *= factor;
            }
        }
    }
}
