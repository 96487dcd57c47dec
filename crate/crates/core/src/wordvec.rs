//! Pretrained word-vector tables and the unified embedding matrix.
//!
//! Several tables are concatenated column-wise, in a fixed order, so a token's
//! unified vector is made of one block per table.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::{TokenSequence, PAD};
use crate::error::{Error, Result};
use crate::hash;

/// Word → vector lookup with a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    name: String,
    dim: usize,
    index: BTreeMap<String, usize>,
    data: Vec<f64>,
    duplicates: usize,
}

impl WordVectorTable {
    pub fn new(name: impl Into<String>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("word vector dimension must be positive".into()));
        }
        Ok(Self {
            name: name.into(),
            dim,
            index: BTreeMap::new(),
            data: Vec::new(),
            duplicates: 0,
        })
    }

    /// Inserts a vector. A word already present keeps its first vector and
    /// the duplicate counter is bumped; returns whether the entry was stored.
    pub fn insert(&mut self, word: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Invalid(format!(
                "vector for {word:?} has {} components, table dimension is {}",
                vector.len(),
                self.dim
            )));
        }
        if let Some(v) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("non-finite component {v} for {word:?}")));
        }
        if self.index.contains_key(word) {
            self.duplicates += 1;
            return Ok(false);
        }
        self.index.insert(word.to_string(), self.data.len() / self.dim);
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Number of duplicate entries skipped while loading.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&row| &self.data[row * self.dim..(row + 1) * self.dim])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }
}

/// How a table fills a token it does not contain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum OovPolicy {
    #[default]
    Zeros,
    /// Uniform values in `[low, high)` hashed from `(seed, table, token, component)`.
    SeededUniform { low: f64, high: f64, seed: u64 },
}

/// An ordered list of tables producing concatenated vectors.
#[derive(Debug, Clone)]
pub struct UnifiedEmbedder {
    tables: Vec<WordVectorTable>,
    offsets: Vec<usize>,
    total_dim: usize,
    oov: OovPolicy,
}

impl UnifiedEmbedder {
    pub fn new(tables: Vec<WordVectorTable>, oov: OovPolicy) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::Invalid("embedder needs at least one table".into()));
        }
        if let OovPolicy::SeededUniform { low, high, .. } = oov {
            if !(low < high) || !low.is_finite() || !high.is_finite() {
                return Err(Error::Invalid(format!("bad OOV range [{low}, {high})")));
            }
        }
        let mut offsets = Vec::with_capacity(tables.len());
        let mut total_dim = 0;
        for t in &tables {
            offsets.push(total_dim);
            total_dim += t.dim();
        }
        Ok(Self {
            tables,
            offsets,
            total_dim,
            oov,
        })
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn tables(&self) -> &[WordVectorTable] {
        &self.tables
    }

    /// Column offset of each table's block.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov
    }

    /// Writes the unified vector for `token` into `out` (length `total_dim`).
    fn embed_into(&self, token: &str, out: &mut [f64]) {
        if token == PAD {
            out.fill(0.0);
            return;
        }
        for (ti, (table, &off)) in self.tables.iter().zip(&self.offsets).enumerate() {
            let block = &mut out[off..off + table.dim()];
            match (table.get(token), self.oov) {
                (Some(v), _) => block.copy_from_slice(v),
                (None, OovPolicy::Zeros) => block.fill(0.0),
                (None, OovPolicy::SeededUniform { low, high, seed }) => {
                    for (d, x) in block.iter_mut().enumerate() {
                        let h = hash::mix(seed, token, &[ti as u64, d as u64]);
                        *x = low + (high - low) * hash::unit(h);
                    }
                }
            }
        }
    }

    pub fn embed_token(&self, token: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.total_dim];
        self.embed_into(token, &mut v);
        v
    }

    /// One row per token of the padded sequence.
    pub fn build_matrix(&self, seq: &TokenSequence) -> EmbeddingMatrix {
        let rows = seq.tokens.len();
        let mut data = vec![0.0; rows * self.total_dim];
        for (t, tok) in seq.tokens.iter().enumerate() {
            self.embed_into(tok, &mut data[t * self.total_dim..(t + 1) * self.total_dim]);
        }
        EmbeddingMatrix {
            rows,
            cols: self.total_dim,
            data,
        }
    }
}

/// Dense `rows × cols` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coverage {
    pub hits: usize,
    pub misses: usize,
    pub missing: Vec<String>,
}

/// Counts how many tokens the table knows. `missing` lists each missed
/// token occurrence in input order.
pub fn coverage_report<S: AsRef<str>>(table: &WordVectorTable, tokens: &[S]) -> Coverage {
    let mut hits = 0;
    let mut missing = Vec::new();
    for t in tokens {
        if table.contains(t.as_ref()) {
            hits += 1;
        } else {
            missing.push(t.as_ref().to_string());
        }
    }
    Coverage {
        hits,
        misses: missing.len(),
        missing,
    }
}

/// Distinct tokens, useful for restricting which vectors get loaded.
pub fn vocabulary<'a, I: IntoIterator<Item = &'a TokenSequence>>(seqs: I) -> BTreeSet<String> {
    seqs.into_iter()
        .flat_map(|s| s.content().iter().cloned())
        .collect()
}
