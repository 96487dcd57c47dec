//! Layer fusion of encoder hidden states.
//!
//! Each encoder layer is reduced over the token axis to its mean followed by
//! its maximum. Pooled layers are concatenated two at a time, each pair is
//! scaled by its weight, and the weighted pairs either form the rows of a
//! sequence (one row per pair) or are summed into one row.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};
use crate::hash;

/// Per-layer, per-token hidden states, stored `[layer][token][dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub id: String,
    n_layers: usize,
    seq_len: usize,
    hidden: usize,
    data: Vec<f64>,
}

impl LayerStack {
    pub fn new(
        id: impl Into<String>,
        n_layers: usize,
        seq_len: usize,
        hidden: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if n_layers == 0 || hidden == 0 {
            return Err(Error::Invalid("layer stack needs at least one layer and dimension".into()));
        }
        if seq_len == 0 {
            return Err(Error::EmptySequence);
        }
        let expected = n_layers
            .checked_mul(seq_len)
            .and_then(|v| v.checked_mul(hidden))
            .ok_or_else(|| Error::Invalid("layer stack dimensions overflow".into()))?;
        if data.len() != expected {
            return Err(Error::Invalid(format!(
                "layer stack {n_layers}x{seq_len}x{hidden} needs {expected} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("layer stack contains non-finite values".into()));
        }
        Ok(Self {
            id: id.into(),
            n_layers,
            seq_len,
            hidden,
            data,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Token-major slice of one layer (1-based index).
    pub fn layer(&self, layer_index: usize) -> Result<&[f64]> {
        self.check_index(layer_index)?;
        let size = self.seq_len * self.hidden;
        let start = (layer_index - 1) * size;
        Ok(&self.data[start..start + size])
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index == 0 || index > self.n_layers {
            return Err(Error::LayerIndex {
                index,
                n_layers: self.n_layers,
            });
        }
        Ok(())
    }
}

/// Mean block followed by max block, `2 · hidden` values.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledLayer(pub Vec<f64>);

impl PooledLayer {
    pub fn hidden(&self) -> usize {
        self.0.len() / 2
    }

    pub fn avg(&self) -> &[f64] {
        &self.0[..self.hidden()]
    }

    pub fn max(&self) -> &[f64] {
        &self.0[self.hidden()..]
    }
}

pub fn pool_layer(stack: &LayerStack, layer_index: usize) -> Result<PooledLayer> {
    let layer = stack.layer(layer_index)?;
    let h = stack.hidden;
    let mut out = vec![0.0; 2 * h];
    let (sum, max) = out.split_at_mut(h);
    max.fill(f64::NEG_INFINITY);
    for token in layer.chunks_exact(h) {
        for ((s, m), &v) in sum.iter_mut().zip(max.iter_mut()).zip(token) {
            *s += v;
            if v > *m {
                *m = v;
            }
        }
    }
    let n = stack.seq_len as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(PooledLayer(out))
}

/// `first ⊙ second`.
pub fn pair_concat(first: &PooledLayer, second: &PooledLayer) -> Result<Vec<f64>> {
    if first.0.len() != second.0.len() {
        return Err(Error::Shape {
            op: "pair_concat",
            detail: format!("{} vs {}", first.0.len(), second.0.len()),
        });
    }
    let mut out = Vec::with_capacity(first.0.len() * 2);
    out.extend_from_slice(&first.0);
    out.extend_from_slice(&second.0);
    Ok(out)
}

/// Ordered layer pairs (1-based). The first layer of each pair is placed
/// first in the concatenation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerPairing {
    pairs: Vec<(usize, usize)>,
}

impl LayerPairing {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Invalid("layer pairing is empty".into()));
        }
        let mut seen: Vec<usize> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
        if seen.contains(&0) {
            return Err(Error::Invalid("layer indices are 1-based".into()));
        }
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("layer pairing repeats an index".into()));
        }
        Ok(Self { pairs })
    }

    /// `(1,2), (3,4), …` over `n_layers` layers (must be even).
    pub fn consecutive(n_layers: usize) -> Result<Self> {
        if n_layers == 0 || !n_layers.is_multiple_of(2) {
            return Err(Error::Invalid(format!(
                "consecutive pairing needs an even, positive layer count, got {n_layers}"
            )));
        }
        Self::new((0..n_layers / 2).map(|i| (2 * i + 1, 2 * i + 2)).collect())
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// One weight per layer pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights(pub Vec<f64>);

impl LayerWeights {
    pub fn uniform(n_pairs: usize) -> Self {
        Self(vec![1.0; n_pairs])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// One row per pair.
    #[default]
    LayerSequence,
    /// Single row: the weighted sum of all pairs.
    Summed,
}

/// Branch-A input: `rows × (4 · hidden)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSequence {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FusedSequence {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

pub fn fuse(
    stack: &LayerStack,
    pairing: &LayerPairing,
    weights: &LayerWeights,
    mode: FusionMode,
) -> Result<FusedSequence> {
    if weights.0.len() != pairing.len() {
        return Err(Error::Invalid(format!(
            "{} weights for {} layer pairs",
            weights.0.len(),
            pairing.len()
        )));
    }
    if weights.0.iter().any(|w| !w.is_finite()) {
        return Err(Error::Invalid("layer weights must be finite".into()));
    }
    let cols = 4 * stack.hidden;
    let mut rows = Vec::with_capacity(pairing.len() * cols);
    for (&(a, b), &alpha) in pairing.pairs().iter().zip(&weights.0) {
        let pa = pool_layer(stack, a)?;
        let pb = pool_layer(stack, b)?;
        rows.extend(pair_concat(&pa, &pb)?.into_iter().map(|v| alpha * v));
    }
    Ok(match mode {
        FusionMode::LayerSequence => FusedSequence {
            rows: pairing.len(),
            cols,
            data: rows,
        },
        FusionMode::Summed => {
            let mut sum = vec![0.0; cols];
            for row in rows.chunks_exact(cols) {
                sum.iter_mut().zip(row).for_each(|(s, v)| *s += v);
            }
            FusedSequence {
                rows: 1,
                cols,
                data: sum,
            }
        }
    })
}

/// Keeps the listed layers in the listed order. The count must be even so
/// that positions can later be paired `(1,2), (3,4), …`.
pub fn select_layers(stack: &LayerStack, indices: &[usize]) -> Result<LayerStack> {
    if indices.is_empty() || !indices.len().is_multiple_of(2) {
        return Err(Error::Invalid(format!(
            "layer selection needs an even, non-zero count, got {}",
            indices.len()
        )));
    }
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Invalid("layer selection repeats an index".into()));
    }
    let mut data = Vec::with_capacity(indices.len() * stack.seq_len * stack.hidden);
    for &i in indices {
        data.extend_from_slice(stack.layer(i)?);
    }
    LayerStack::new(stack.id.clone(), indices.len(), stack.seq_len, stack.hidden, data)
}

/// Deterministic stand-in for an encoder: each value is hashed from
/// `(seed, token, layer, dim)` into `[-1, 1)` and rounded to `f32` so that it
/// survives the hidden-state container unchanged. Pads are excluded.
pub fn pseudo_encode(
    seq: &TokenSequence,
    n_layers: usize,
    hidden: usize,
    seed: u64,
) -> Result<LayerStack> {
    let tokens = seq.content();
    if tokens.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut data = Vec::with_capacity(n_layers * tokens.len() * hidden);
    for layer in 0..n_layers {
        for tok in tokens {
            for d in 0..hidden {
                let h = hash::mix(seed, tok, &[layer as u64, d as u64]);
                let v = 2.0 * hash::unit(h) - 1.0;
                data.push(f64::from(v as f32));
            }
        }
    }
    LayerStack::new(String::new(), n_layers, tokens.len(), hidden, data)
}
