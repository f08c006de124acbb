//! Versioned binary checkpoints.
//!
//! Layout, in order: an 8-byte magic string, a u32 format version, a
//! length-prefixed `key = value` text block (configs, progress, vocabulary
//! digest), and a counted list of named little-endian IEEE-754 f64 arrays
//! with declared shapes. All integers are little-endian. Numeric payloads
//! round-trip bit-exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::adam::OptimizerState;
use super::{TrainConfig, TrainError};
use crate::data::SampleMix;
use crate::model::{ModelConfig, ModelParameters};
use crate::numerics::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SEQRECCP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub params: ModelParameters,
    pub optimizer: OptimizerState,
    /// Epochs already trained; resuming continues at this index.
    pub epochs_completed: u64,
    pub vocab_digest: String,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Loads and, when `expected_digest` is given, refuses checkpoints built
    /// against a different vocabulary.
    pub fn load(path: &Path, expected_digest: Option<&str>) -> Result<Self, TrainError> {
        let mut r = BufReader::new(File::open(path)?);
        let ck = Self::read_from(&mut r)?;
        if let Some(expected) = expected_digest {
            if ck.vocab_digest != expected {
                return Err(TrainError::DigestMismatch {
                    stored: ck.vocab_digest,
                    actual: expected.to_string(),
                });
            }
        }
        Ok(ck)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), TrainError> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;

        let config = self.config_block();
        w.write_all(&(config.len() as u64).to_le_bytes())?;
        w.write_all(config.as_bytes())?;

        let n = self.params.slot_count();
        w.write_all(&(3 * n as u32).to_le_bytes())?;
        for i in 0..n {
            write_array(w, &self.params.slot_info(i).name, self.params.slot(i))?;
        }
        for i in 0..n {
            let name = format!("adam_m.{}", self.params.slot_info(i).name);
            write_array(w, &name, self.optimizer.first_moment(i))?;
        }
        for i in 0..n {
            let name = format!("adam_v.{}", self.params.slot_info(i).name);
            write_array(w, &name, self.optimizer.second_moment(i))?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, TrainError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(TrainError::BadMagic);
        }
        let version = read_u32(r)?;
        if version != CHECKPOINT_VERSION {
            return Err(TrainError::UnsupportedVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }

        let config_len = read_u64(r)? as usize;
        let mut config_bytes = vec![0u8; config_len];
        r.read_exact(&mut config_bytes)?;
        let config_text = String::from_utf8(config_bytes)
            .map_err(|_| TrainError::Corrupt("config block is not UTF-8".into()))?;
        let kv = parse_kv(&config_text);

        let model_config = model_config_from(&kv)?;
        let train_config = train_config_from(&kv)?;
        let num_items: usize = get(&kv, "num_items")?;
        let epochs_completed: u64 = get(&kv, "epochs_completed")?;
        let adam_steps: u64 = get(&kv, "adam_step")?;
        let vocab_digest: String = get(&kv, "vocab_digest")?;

        let count = read_u32(r)? as usize;
        if count % 3 != 0 {
            return Err(TrainError::Corrupt(format!("array count {count} not divisible by 3")));
        }
        let per_section = count / 3;
        let mut arrays = Vec::with_capacity(count);
        for _ in 0..count {
            arrays.push(read_array(r)?);
        }

        let mut sections = arrays.chunks_exact(per_section);
        let param_arrays = sections.next().expect("validated above");
        let m_arrays = sections.next().expect("validated above");
        let v_arrays = sections.next().expect("validated above");

        let params = ModelParameters::from_slots(
            num_items,
            model_config.hidden_size,
            model_config.max_len,
            model_config.num_layers,
            model_config.ffn_multiplier,
            param_arrays.iter().map(|(_, t)| t.clone()).collect(),
        )
        .map_err(|e| TrainError::Corrupt(e.to_string()))?;
        for (i, (name, _)) in param_arrays.iter().enumerate() {
            let expected = params.slot_info(i).name;
            if *name != expected {
                return Err(TrainError::Corrupt(format!(
                    "array {i} named {name:?}, expected {expected:?}"
                )));
            }
        }
        let moments = |arrays: &[(String, Tensor)], prefix: &str| -> Result<Vec<Tensor>, TrainError> {
            arrays
                .iter()
                .enumerate()
                .map(|(i, (name, t))| {
                    let expected = format!("{prefix}.{}", params.slot_info(i).name);
                    if *name != expected {
                        return Err(TrainError::Corrupt(format!(
                            "array named {name:?}, expected {expected:?}"
                        )));
                    }
                    if t.shape() != params.slot(i).shape() {
                        return Err(TrainError::Corrupt(format!(
                            "moment {name:?} shape {:?} != parameter shape {:?}",
                            t.shape(),
                            params.slot(i).shape()
                        )));
                    }
                    Ok(t.clone())
                })
                .collect()
        };
        let optimizer = OptimizerState::from_parts(
            moments(m_arrays, "adam_m")?,
            moments(v_arrays, "adam_v")?,
            adam_steps,
        );

        Ok(Checkpoint {
            model_config,
            train_config,
            params,
            optimizer,
            epochs_completed,
            vocab_digest,
        })
    }

    fn config_block(&self) -> String {
        let m = &self.model_config;
        let t = &self.train_config;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("hidden_size", m.hidden_size.to_string());
        kv("num_layers", m.num_layers.to_string());
        kv("num_heads", m.num_heads.to_string());
        kv("max_len", m.max_len.to_string());
        kv("mask_proportion", m.mask_proportion.to_string());
        kv("num_negatives", m.num_negatives.to_string());
        kv("dropout_rate", m.dropout_rate.to_string());
        kv("matching_scale", m.matching_scale.to_string());
        kv("use_position_embedding", m.use_position_embedding.to_string());
        kv("use_matching_task", m.use_matching_task.to_string());
        kv("ffn_multiplier", m.ffn_multiplier.to_string());
        kv("learning_rate", t.learning_rate.to_string());
        kv("beta1", t.beta1.to_string());
        kv("beta2", t.beta2.to_string());
        kv("l2_coefficient", t.l2_coefficient.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("epochs", t.epochs.to_string());
        kv("global_seed", t.global_seed.to_string());
        kv(
            "sample_mix",
            format!(
                "{}:{}:{}",
                t.sample_mix.mask_matching, t.sample_mix.last_mask, t.sample_mix.matching_only
            ),
        );
        kv("hide_matching_positive", t.hide_matching_positive.to_string());
        kv("num_items", self.params.num_items().to_string());
        kv("epochs_completed", self.epochs_completed.to_string());
        kv("adam_step", self.optimizer.step().to_string());
        kv("vocab_digest", self.vocab_digest.clone());
        s
    }
}

fn write_array<W: Write>(w: &mut W, name: &str, t: &Tensor) -> Result<(), TrainError> {
    let bytes = name.as_bytes();
    w.write_all(&(bytes.len() as u16).to_le_bytes())?;
    w.write_all(bytes)?;
    w.write_all(&[t.shape().len() as u8])?;
    for &dim in t.shape() {
        w.write_all(&(dim as u64).to_le_bytes())?;
    }
    for &v in t.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<R: Read>(r: &mut R) -> Result<(String, Tensor), TrainError> {
    let name_len = read_u16(r)? as usize;
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)?;
    let name = String::from_utf8(name)
        .map_err(|_| TrainError::Corrupt("array name is not UTF-8".into()))?;
    let mut ndim = [0u8; 1];
    r.read_exact(&mut ndim)?;
    let mut shape = Vec::with_capacity(ndim[0] as usize);
    for _ in 0..ndim[0] {
        shape.push(read_u64(r)? as usize);
    }
    let len: usize = shape.iter().product();
    let mut data = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    let tensor = Tensor::new(shape, data)
        .map_err(|e| TrainError::Corrupt(format!("array {name:?}: {e}")))?;
    Ok((name, tensor))
}

fn read_u16<R: Read>(r: &mut R) -> Result<u16, TrainError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b)?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, TrainError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, TrainError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn parse_kv(text: &str) -> HashMap<String, String> {
    text.lines()
        .filter_map(|line| {
            line.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn get<T: std::str::FromStr>(kv: &HashMap<String, String>, key: &str) -> Result<T, TrainError> {
    kv.get(key)
        .ok_or_else(|| TrainError::Corrupt(format!("missing key {key:?}")))?
        .parse()
        .map_err(|_| TrainError::Corrupt(format!("bad value for {key:?}")))
}

fn model_config_from(kv: &HashMap<String, String>) -> Result<ModelConfig, TrainError> {
    Ok(ModelConfig {
        hidden_size: get(kv, "hidden_size")?,
        num_layers: get(kv, "num_layers")?,
        num_heads: get(kv, "num_heads")?,
        max_len: get(kv, "max_len")?,
        mask_proportion: get(kv, "mask_proportion")?,
        num_negatives: get(kv, "num_negatives")?,
        dropout_rate: get(kv, "dropout_rate")?,
        matching_scale: get(kv, "matching_scale")?,
        use_position_embedding: get(kv, "use_position_embedding")?,
        use_matching_task: get(kv, "use_matching_task")?,
        ffn_multiplier: get(kv, "ffn_multiplier")?,
    })
}

fn train_config_from(kv: &HashMap<String, String>) -> Result<TrainConfig, TrainError> {
    let mix_text: String = get(kv, "sample_mix")?;
    let parts: Vec<&str> = mix_text.split(':').collect();
    if parts.len() != 3 {
        return Err(TrainError::Corrupt(format!("bad sample_mix {mix_text:?}")));
    }
    let part = |i: usize| -> Result<u32, TrainError> {
        parts[i]
            .parse()
            .map_err(|_| TrainError::Corrupt(format!("bad sample_mix {mix_text:?}")))
    };
    Ok(TrainConfig {
        learning_rate: get(kv, "learning_rate")?,
        beta1: get(kv, "beta1")?,
        beta2: get(kv, "beta2")?,
        l2_coefficient: get(kv, "l2_coefficient")?,
        batch_size: get(kv, "batch_size")?,
        epochs: get(kv, "epochs")?,
        global_seed: get(kv, "global_seed")?,
        sample_mix: SampleMix {
            mask_matching: part(0)?,
            last_mask: part(1)?,
            matching_only: part(2)?,
        },
        hide_matching_positive: get(kv, "hide_matching_positive")?,
    })
}
