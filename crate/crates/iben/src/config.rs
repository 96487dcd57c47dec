//! Run configuration. The serde types below are the schema: unknown keys are
//! rejected, missing keys take the defaults of the reference training regime,
//! and [`RunConfig::validate`] checks the cross-field rules.

use std::path::{Path, PathBuf};

use iben_core::bertfuse::FusionMode;
use iben_core::corpus::{Variant, DEFAULT_MAX_LEN};
use iben_core::model::{Branches, EmbSubModel, ModelConfig};
use iben_core::train::{LossKind, OptimizerKind, TrainConfig};
use iben_core::wordvec::OovPolicy;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::vectors::VectorFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Original,
    #[default]
    Edited,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Original => Variant::Original,
            VariantName::Edited => Variant::Edited,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BranchName {
    Bert,
    Emb,
    #[default]
    Both,
}

impl From<BranchName> for Branches {
    fn from(b: BranchName) -> Self {
        match b {
            BranchName::Bert => Branches::Bert,
            BranchName::Emb => Branches::Emb,
            BranchName::Both => Branches::Both,
        }
    }
}

impl From<Branches> for BranchName {
    fn from(b: Branches) -> Self {
        match b {
            Branches::Bert => BranchName::Bert,
            Branches::Emb => BranchName::Emb,
            Branches::Both => BranchName::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubModelName {
    Bigru,
    Cnn,
    #[default]
    Both,
}

impl From<SubModelName> for EmbSubModel {
    fn from(s: SubModelName) -> Self {
        match s {
            SubModelName::Bigru => EmbSubModel::BiGru,
            SubModelName::Cnn => EmbSubModel::Cnn,
            SubModelName::Both => EmbSubModel::Both,
        }
    }
}

impl From<EmbSubModel> for SubModelName {
    fn from(s: EmbSubModel) -> Self {
        match s {
            EmbSubModel::BiGru => SubModelName::Bigru,
            EmbSubModel::Cnn => SubModelName::Cnn,
            EmbSubModel::Both => SubModelName::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FusionName {
    #[default]
    LayerSequence,
    Summed,
}

impl From<FusionName> for FusionMode {
    fn from(f: FusionName) -> Self {
        match f {
            FusionName::LayerSequence => FusionMode::LayerSequence,
            FusionName::Summed => FusionMode::Summed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    #[default]
    Mse,
    MaeSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    /// Hidden-state file for the training records.
    pub features: Option<PathBuf>,
    pub dev_features: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub max_len: usize,
    /// Applies to the word-vector path only.
    pub remove_stopwords: bool,
    /// Replaces the bundled list.
    pub stopword_file: Option<PathBuf>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            max_len: DEFAULT_MAX_LEN,
            remove_stopwords: true,
            stopword_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub name: String,
    pub path: PathBuf,
    pub format: VectorFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum OovSpec {
    #[default]
    Zeros,
    SeededUniform { low: f64, high: f64, seed: u64 },
}

impl From<OovSpec> for OovPolicy {
    fn from(o: OovSpec) -> Self {
        match o {
            OovSpec::Zeros => OovPolicy::Zeros,
            OovSpec::SeededUniform { low, high, seed } => OovPolicy::SeededUniform { low, high, seed },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingsConfig {
    /// Column blocks follow this order.
    pub tables: Vec<TableSpec>,
    pub oov: OovSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BertConfig {
    /// 1-based layers to keep, in order; `None` keeps all.
    pub layers: Option<Vec<usize>>,
    /// Pairs over the kept layers (1-based positions); `None` pairs
    /// `(1,2), (3,4), …`.
    pub pairing: Option<Vec<(usize, usize)>>,
    /// One weight per pair; `None` means all ones.
    pub weights: Option<Vec<f64>>,
    pub fusion: FusionName,
    /// Trains the pair weights, starting from `weights`.
    pub learnable_weights: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub branches: BranchName,
    pub emb_sub: SubModelName,
    pub gru_hidden: usize,
    pub dense_width: usize,
    pub dense_relu: bool,
    pub gate_bias: bool,
    pub kernel_sizes: Vec<usize>,
    pub filters_per_kernel: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let d = ModelConfig::default();
        Self {
            branches: d.branches.into(),
            emb_sub: d.emb_sub.into(),
            gru_hidden: d.gru_hidden,
            dense_width: d.dense_width,
            dense_relu: d.dense_relu,
            gate_bias: d.gate_bias,
            kernel_sizes: d.kernel_sizes,
            filters_per_kernel: d.filters_per_kernel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: LossName,
    pub optimizer: OptimizerName,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub shuffle: bool,
    pub clip: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            loss: LossName::Mse,
            optimizer: OptimizerName::Adam,
            beta1: d.beta1,
            beta2: d.beta2,
            epsilon: d.epsilon,
            shuffle: d.shuffle,
            clip: d.clip,
        }
    }
}

impl TrainSection {
    pub fn to_core(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            loss: match self.loss {
                LossName::Mse => LossKind::Mse,
                LossName::MaeSum => LossKind::MaeSum,
            },
            optimizer: match self.optimizer {
                OptimizerName::Adam => OptimizerKind::Adam,
                OptimizerName::Sgd => OptimizerKind::Sgd,
            },
            seed,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            shuffle: self.shuffle,
            clip: self.clip,
        }
    }
}

/// Everything needed to turn a dataset record into model inputs. Stored in
/// checkpoints so evaluation rebuilds features the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSpec {
    pub variant: VariantName,
    pub preprocess: PreprocessConfig,
    pub embeddings: EmbeddingsConfig,
    pub bert: BertConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataPaths,
    pub variant: VariantName,
    pub preprocess: PreprocessConfig,
    pub embeddings: EmbeddingsConfig,
    pub bert: BertConfig,
    pub model: ModelSection,
    pub train: TrainSection,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataPaths::default(),
            variant: VariantName::Edited,
            preprocess: PreprocessConfig::default(),
            embeddings: EmbeddingsConfig::default(),
            bert: BertConfig::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            seed: 0,
            output_dir: PathBuf::from("runs/iben"),
        }
    }
}

impl RunConfig {
    /// Parses JSON text, applies `key.path=value` overrides, then validates.
    pub fn from_json(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text, overrides)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.data.train,
            &mut self.data.dev,
            &mut self.data.features,
            &mut self.data.dev_features,
            &mut self.preprocess.stopword_file,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        for t in &mut self.embeddings.tables {
            fix(&mut t.path);
        }
        fix(&mut self.output_dir);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn features(&self) -> FeatureSpec {
        FeatureSpec {
            variant: self.variant,
            preprocess: self.preprocess.clone(),
            embeddings: self.embeddings.clone(),
            bert: self.bert.clone(),
        }
    }

    pub fn branches(&self) -> Branches {
        self.model.branches.into()
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.to_core(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.train_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.preprocess.max_len == 0 {
            return bad("preprocess.max_len must be at least 1".into());
        }
        let m = &self.model;
        if m.gru_hidden == 0 || m.dense_width == 0 {
            return bad("model widths must be positive".into());
        }
        let branches = self.branches();
        if branches.emb() {
            if self.embeddings.tables.is_empty() {
                return bad("the embedding branch needs at least one table in embeddings.tables".into());
            }
            let mut names: Vec<&str> = self.embeddings.tables.iter().map(|t| t.name.as_str()).collect();
            names.sort_unstable();
            if names.windows(2).any(|w| w[0] == w[1]) {
                return bad("embedding table names must be distinct".into());
            }
            let conv = EmbSubModel::from(m.emb_sub).conv();
            if conv && (m.kernel_sizes.is_empty() || m.kernel_sizes.contains(&0) || m.filters_per_kernel == 0) {
                return bad("convolution needs kernel sizes ≥ 1 and filters_per_kernel ≥ 1".into());
            }
            if conv && m.kernel_sizes.iter().any(|&k| k > self.preprocess.max_len) {
                return bad("kernel sizes cannot exceed preprocess.max_len".into());
            }
            if let OovSpec::SeededUniform { low, high, .. } = self.embeddings.oov {
                if !(low < high) || !low.is_finite() || !high.is_finite() {
                    return bad(format!("bad OOV range [{low}, {high})"));
                }
            }
        }
        if branches.bert() {
            let b = &self.bert;
            if let Some(layers) = &b.layers {
                if layers.is_empty() || layers.len() % 2 != 0 || layers.contains(&0) {
                    return bad("bert.layers needs an even, non-zero count of 1-based indices".into());
                }
            }
            if let (Some(p), Some(w)) = (&b.pairing, &b.weights) {
                if p.len() != w.len() {
                    return bad(format!("{} bert.weights for {} pairs", w.len(), p.len()));
                }
            }
            if let Some(w) = &b.weights {
                if w.iter().any(|x| !x.is_finite()) {
                    return bad("bert.weights must be finite".into());
                }
            }
            if b.learnable_weights && b.fusion != FusionName::LayerSequence {
                return bad("learnable weights need layer_sequence fusion".into());
            }
        }
        Ok(())
    }
}

/// `a.b.c=value`; the value is read as JSON when it parses, else as a string.
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("override key {key:?} has an empty segment")));
        }
        if node.is_null() {
            *node = Value::Object(Default::default());
        }
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Config(format!("override {key:?}: {} is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one part")
}
