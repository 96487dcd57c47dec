//! Turns dataset records into model inputs.
//!
//! The word-vector path runs edit → tokenize → stopword removal → pad/truncate
//! → unified embedding. The encoder path looks up the record's hidden states
//! by id, selects layers, pairs and fuses them. Stopwords are never removed on
//! the encoder path; the hidden-state file carries its own token axis.

use std::collections::{BTreeSet, HashMap};

use iben_core::bertfuse::{fuse, select_layers, FusedSequence, LayerPairing, LayerStack, LayerWeights};
use iben_core::corpus::{pad_truncate, remove_stopwords, tokenize, HeadlineRecord, StopList, TokenSequence, Variant};
use iben_core::model::{Branches, ModelConfig, ModelInput};
use iben_core::train::Sample;
use iben_core::wordvec::{vocabulary, UnifiedEmbedder};

use crate::config::{FeatureSpec, ModelSection};
use crate::error::{Error, Result};
use crate::vectors::load_text_vectors;

pub fn load_stoplist(spec: &FeatureSpec) -> Result<Option<StopList>> {
    if !spec.preprocess.remove_stopwords {
        return Ok(None);
    }
    Ok(Some(match &spec.preprocess.stopword_file {
        None => StopList::bundled(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            StopList::parse(&text).map_err(|e| Error::file(p.display().to_string(), e.to_string()))?
        }
    }))
}

/// Word-vector path tokens for one record.
pub fn record_tokens(rec: &HeadlineRecord, variant: Variant, stoplist: Option<&StopList>, max_len: usize) -> Result<TokenSequence> {
    let mut tokens = tokenize(&rec.apply_edit(variant));
    if let Some(s) = stoplist {
        tokens = remove_stopwords(tokens, s);
    }
    Ok(pad_truncate(tokens, max_len)?)
}

pub struct Pipeline {
    spec: FeatureSpec,
    branches: Branches,
    stoplist: Option<StopList>,
    embedder: Option<UnifiedEmbedder>,
}

impl Pipeline {
    /// Loads word vectors (only for words that occur in `records`) when the
    /// embedding branch is enabled.
    pub fn new(spec: &FeatureSpec, branches: Branches, records: &[&[HeadlineRecord]]) -> Result<Self> {
        let stoplist = load_stoplist(spec)?;
        let mut pipeline = Self {
            spec: spec.clone(),
            branches,
            stoplist,
            embedder: None,
        };
        if branches.emb() {
            let mut seqs = Vec::new();
            for rec in records.iter().flat_map(|r| r.iter()) {
                seqs.push(pipeline.tokens(rec)?);
            }
            let vocab: BTreeSet<String> = vocabulary(&seqs);
            let mut tables = Vec::with_capacity(spec.embeddings.tables.len());
            for t in &spec.embeddings.tables {
                tables.push(load_text_vectors(&t.path, t.format, &t.name, Some(&vocab))?);
            }
            pipeline.embedder = Some(UnifiedEmbedder::new(tables, spec.embeddings.oov.into())?);
        }
        Ok(pipeline)
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn embedder(&self) -> Option<&UnifiedEmbedder> {
        self.embedder.as_ref()
    }

    pub fn tokens(&self, rec: &HeadlineRecord) -> Result<TokenSequence> {
        record_tokens(rec, self.spec.variant.into(), self.stoplist.as_ref(), self.spec.preprocess.max_len)
    }

    pub fn fuse_stack(&self, stack: &LayerStack) -> Result<FusedSequence> {
        fuse_with(&self.spec, stack)
    }

    /// One sample per record, in record order. `stacks` must cover every
    /// record id when the encoder branch is enabled.
    pub fn samples(&self, records: &[HeadlineRecord], stacks: Option<(&[LayerStack], &str)>) -> Result<Vec<Sample>> {
        let by_id: HashMap<&str, &LayerStack> = stacks
            .map(|(s, _)| s.iter().map(|st| (st.id.as_str(), st)).collect())
            .unwrap_or_default();
        let mut out = Vec::with_capacity(records.len());
        for rec in records {
            let fused = if self.branches.bert() {
                let (_, source) = stacks.ok_or_else(|| Error::Config("the encoder branch needs a hidden-state file".into()))?;
                let stack = by_id
                    .get(rec.id.as_str())
                    .ok_or_else(|| Error::file(source, format!("no hidden states for record {:?}", rec.id)))?;
                Some((&self.fuse_stack(stack)?).into())
            } else {
                None
            };
            let emb = match &self.embedder {
                Some(e) => Some((&e.build_matrix(&self.tokens(rec)?)).into()),
                None => None,
            };
            out.push(Sample {
                id: rec.id.clone(),
                input: ModelInput { fused, emb },
                target: rec.mean_grade,
            });
        }
        Ok(out)
    }

    /// Model shape derived from the features: `fused_shape` is the
    /// `(rows, cols)` of any one fused sequence; the embedding width comes
    /// from the tables.
    pub fn model_config(&self, section: &ModelSection, fused_shape: Option<(usize, usize)>) -> Result<ModelConfig> {
        let (bert_input_dim, n_pairs) = match (self.branches.bert(), fused_shape) {
            (true, Some((rows, cols))) => (cols, rows),
            (true, None) => return Err(Error::Config("no hidden states to size the encoder branch".into())),
            (false, _) => (0, 0),
        };
        let learnable = self.branches.bert() && self.spec.bert.learnable_weights;
        Ok(ModelConfig {
            branches: self.branches,
            emb_sub: section.emb_sub.into(),
            bert_input_dim,
            n_pairs,
            emb_input_dim: self.embedder.as_ref().map_or(0, UnifiedEmbedder::total_dim),
            gru_hidden: section.gru_hidden,
            dense_width: section.dense_width,
            dense_relu: section.dense_relu,
            gate_bias: section.gate_bias,
            kernel_sizes: section.kernel_sizes.clone(),
            filters_per_kernel: section.filters_per_kernel,
            learnable_alpha: learnable,
            alpha_init: if learnable { self.spec.bert.weights.clone() } else { None },
        })
    }
}

/// Layer selection, pairing and weighting as configured. With learnable
/// weights the fixed weights are all ones; the model applies its own.
pub fn fuse_with(spec: &FeatureSpec, stack: &LayerStack) -> Result<FusedSequence> {
    let b = &spec.bert;
    let selected;
    let stack = match &b.layers {
        Some(idx) => {
            selected = select_layers(stack, idx)?;
            &selected
        }
        None => stack,
    };
    let pairing = match &b.pairing {
        Some(p) => LayerPairing::new(p.clone())?,
        None => LayerPairing::consecutive(stack.n_layers())?,
    };
    let weights = match (&b.weights, b.learnable_weights) {
        (Some(w), false) => LayerWeights(w.clone()),
        _ => LayerWeights::uniform(pairing.len()),
    };
    Ok(fuse(stack, &pairing, &weights, b.fusion.into())?)
}
