//! Checkpoints: one line of JSON header, a newline, then every parameter
//! value as a contiguous little-endian `f64` blob in header order.

use std::path::Path;

use iben_core::autodiff::{ParamId, Tensor};
use iben_core::model::{IbenModel, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::config::{BranchName, FeatureSpec, SubModelName};
use crate::error::{Error, Result};

pub const FORMAT: &str = "iben-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub branches: BranchName,
    pub emb_sub: SubModelName,
    pub bert_input_dim: usize,
    pub n_pairs: usize,
    pub emb_input_dim: usize,
    pub gru_hidden: usize,
    pub dense_width: usize,
    pub dense_relu: bool,
    pub gate_bias: bool,
    pub kernel_sizes: Vec<usize>,
    pub filters_per_kernel: usize,
    pub learnable_alpha: bool,
    pub alpha_init: Option<Vec<f64>>,
}

impl From<&ModelConfig> for ModelDoc {
    fn from(c: &ModelConfig) -> Self {
        Self {
            branches: c.branches.into(),
            emb_sub: c.emb_sub.into(),
            bert_input_dim: c.bert_input_dim,
            n_pairs: c.n_pairs,
            emb_input_dim: c.emb_input_dim,
            gru_hidden: c.gru_hidden,
            dense_width: c.dense_width,
            dense_relu: c.dense_relu,
            gate_bias: c.gate_bias,
            kernel_sizes: c.kernel_sizes.clone(),
            filters_per_kernel: c.filters_per_kernel,
            learnable_alpha: c.learnable_alpha,
            alpha_init: c.alpha_init.clone(),
        }
    }
}

impl From<ModelDoc> for ModelConfig {
    fn from(d: ModelDoc) -> Self {
        Self {
            branches: d.branches.into(),
            emb_sub: d.emb_sub.into(),
            bert_input_dim: d.bert_input_dim,
            n_pairs: d.n_pairs,
            emb_input_dim: d.emb_input_dim,
            gru_hidden: d.gru_hidden,
            dense_width: d.dense_width,
            dense_relu: d.dense_relu,
            gate_bias: d.gate_bias,
            kernel_sizes: d.kernel_sizes,
            filters_per_kernel: d.filters_per_kernel,
            learnable_alpha: d.learnable_alpha,
            alpha_init: d.alpha_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Index of the first value in the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
    seed: u64,
    model: ModelDoc,
    features: Option<FeatureSpec>,
    params: Vec<ParamEntry>,
    n_values: usize,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: IbenModel,
    pub seed: u64,
    pub features: Option<FeatureSpec>,
}

pub fn encode(model: &IbenModel, seed: u64, features: Option<&FeatureSpec>) -> Vec<u8> {
    let mut params = Vec::with_capacity(model.params().len());
    let mut offset = 0;
    for p in model.params().iter() {
        params.push(ParamEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            offset,
        });
        offset += p.value.len();
    }
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        seed,
        model: ModelDoc::from(model.config()),
        features: features.cloned(),
        params,
        n_values: offset,
    };
    let mut out = serde_json::to_vec(&header).expect("header serializes");
    out.push(b'\n');
    out.reserve(offset * 8);
    for p in model.params().iter() {
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8], name: &str) -> Result<Checkpoint> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::file(name, "missing checkpoint header"))?;
    let header: Header =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::file(name, format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::BadMagic(name.into()));
    }
    if header.version != VERSION {
        return Err(Error::file(name, format!("unsupported version {}", header.version)));
    }
    let blob = &bytes[nl + 1..];
    let expected = header
        .n_values
        .checked_mul(8)
        .ok_or_else(|| Error::DimensionOverflow(name.into()))?;
    if blob.len() < expected {
        return Err(Error::Truncated(name.into()));
    }
    if blob.len() > expected {
        return Err(Error::file(name, format!("{} trailing bytes", blob.len() - expected)));
    }

    let config = ModelConfig::from(header.model);
    let mut model = IbenModel::new(config, header.seed)
        .map_err(|e| Error::file(name, format!("invalid model config: {e}")))?;
    if model.params().len() != header.params.len() {
        return Err(Error::file(
            name,
            format!("{} parameters listed, model has {}", header.params.len(), model.params().len()),
        ));
    }
    let mut offset = 0;
    for (i, entry) in header.params.iter().enumerate() {
        let p = model.params_mut().get_mut(ParamId(i));
        if p.name != entry.name || p.value.shape() != entry.shape.as_slice() || entry.offset != offset {
            return Err(Error::file(
                name,
                format!(
                    "parameter {i}: header has {} {:?} at {}, model expects {} {:?} at {offset}",
                    entry.name,
                    entry.shape,
                    entry.offset,
                    p.name,
                    p.value.shape()
                ),
            ));
        }
        let n = p.value.len();
        let data = blob[offset * 8..(offset + n) * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        p.value = Tensor::new(entry.shape.clone(), data)?;
        offset += n;
    }
    if offset != header.n_values {
        return Err(Error::file(name, "n_values disagrees with the parameter list"));
    }
    Ok(Checkpoint {
        model,
        seed: header.seed,
        features: header.features,
    })
}

pub fn save(path: &Path, model: &IbenModel, seed: u64, features: Option<&FeatureSpec>) -> Result<()> {
    std::fs::write(path, encode(model, seed, features)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, &path.display().to_string())
}
