//! The two-branch regressor.
//!
//! Branch A runs a Bi-GRU over the fused encoder-layer sequence. Branch B
//! runs a Bi-GRU and a multi-kernel convolution bank over the word-embedding
//! matrix. Each branch is max/avg pooled, passed through its own dense
//! layer, and the concatenated branch vectors feed an affine head that
//! outputs one real.
//!
//! GRU update (the update gate weights the previous state):
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! h~ = tanh(W_h x + r ∘ (U_h h) + b_h)
//! h' = z ∘ h + (1 − z) ∘ h~
//! ```

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Binding, ParamId, ParamStore, Tape, Tensor, Var};
use crate::bertfuse::FusedSequence;
use crate::error::{Error, Result};
use crate::wordvec::EmbeddingMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branches {
    Bert,
    Emb,
    Both,
}

impl Branches {
    pub fn bert(self) -> bool {
        matches!(self, Branches::Bert | Branches::Both)
    }

    pub fn emb(self) -> bool {
        matches!(self, Branches::Emb | Branches::Both)
    }
}

/// Which sub-models branch B runs over the embedding matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbSubModel {
    BiGru,
    Cnn,
    Both,
}

impl EmbSubModel {
    pub fn rnn(self) -> bool {
        matches!(self, EmbSubModel::BiGru | EmbSubModel::Both)
    }

    pub fn conv(self) -> bool {
        matches!(self, EmbSubModel::Cnn | EmbSubModel::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub branches: Branches,
    pub emb_sub: EmbSubModel,
    /// Width of a fused row (4 × encoder hidden size).
    pub bert_input_dim: usize,
    /// Number of fused rows; only used for learnable layer weights.
    pub n_pairs: usize,
    /// Width of an embedding row.
    pub emb_input_dim: usize,
    pub gru_hidden: usize,
    pub dense_width: usize,
    pub dense_relu: bool,
    pub gate_bias: bool,
    pub kernel_sizes: Vec<usize>,
    pub filters_per_kernel: usize,
    /// Registers one trainable weight per fused row.
    pub learnable_alpha: bool,
    /// Initial values of the learnable weights (default all ones).
    pub alpha_init: Option<Vec<f64>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            branches: Branches::Both,
            emb_sub: EmbSubModel::Both,
            bert_input_dim: 4 * 1024,
            n_pairs: 12,
            emb_input_dim: 900,
            gru_hidden: 128,
            dense_width: 64,
            dense_relu: true,
            gate_bias: true,
            kernel_sizes: vec![1, 2, 3, 4],
            filters_per_kernel: 9,
            learnable_alpha: false,
            alpha_init: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gru_hidden", self.gru_hidden),
            ("dense_width", self.dense_width),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Invalid(format!("{name} must be positive")));
            }
        }
        if self.branches.bert() && self.bert_input_dim == 0 {
            return Err(Error::Invalid("bert_input_dim must be positive".into()));
        }
        if self.branches.emb() {
            if self.emb_input_dim == 0 {
                return Err(Error::Invalid("emb_input_dim must be positive".into()));
            }
            if self.emb_sub.conv()
                && (self.kernel_sizes.is_empty()
                    || self.kernel_sizes.contains(&0)
                    || self.filters_per_kernel == 0)
            {
                return Err(Error::Invalid("convolution needs kernel sizes ≥ 1 and filters ≥ 1".into()));
            }
        }
        if self.learnable_alpha && self.branches.bert() {
            if self.n_pairs == 0 {
                return Err(Error::Invalid("learnable layer weights need n_pairs ≥ 1".into()));
            }
            if let Some(a) = &self.alpha_init {
                if a.len() != self.n_pairs {
                    return Err(Error::Invalid(format!(
                        "{} initial layer weights for {} pairs",
                        a.len(),
                        self.n_pairs
                    )));
                }
            }
        }
        Ok(())
    }

    /// Total filters in the convolution bank.
    pub fn conv_width(&self) -> usize {
        self.kernel_sizes.len() * self.filters_per_kernel
    }
}

/// Parameter ids of one GRU cell. `W_*` are `[H×I]`, `U_*` are `[H×H]`,
/// biases `[H]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GruCell {
    pub input: usize,
    pub hidden: usize,
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub bias: Option<[ParamId; 3]>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BiGru {
    pub forward: GruCell,
    pub backward: GruCell,
}

/// One `(kernel size, kernels [F×k×D], bias [F])` entry per kernel size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvBank {
    pub banks: Vec<(usize, ParamId, ParamId)>,
}

/// Affine map with weight `[out×in]` and bias `[out]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// Seeded Glorot-uniform initializer; biases start at zero.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn glorot(&mut self, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
        let a = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let dist = Uniform::new_inclusive(-a, a);
        let n = shape.iter().product();
        let data = (0..n).map(|_| dist.sample(&mut self.rng)).collect();
        Tensor::new(shape.to_vec(), data).expect("shape matches value count")
    }
}

impl GruCell {
    pub fn register(
        store: &mut ParamStore,
        init: &mut Init,
        prefix: &str,
        input: usize,
        hidden: usize,
        bias: bool,
    ) -> Result<Self> {
        let mut w = |store: &mut ParamStore, name: &str, cols: usize| {
            let t = init.glorot(&[hidden, cols], cols, hidden);
            store.add(format!("{prefix}.{name}"), t)
        };
        let w_z = w(store, "w_z", input)?;
        let w_r = w(store, "w_r", input)?;
        let w_h = w(store, "w_h", input)?;
        let u_z = w(store, "u_z", hidden)?;
        let u_r = w(store, "u_r", hidden)?;
        let u_h = w(store, "u_h", hidden)?;
        let bias = if bias {
            Some([
                store.add(format!("{prefix}.b_z"), Tensor::zeros(&[hidden]))?,
                store.add(format!("{prefix}.b_r"), Tensor::zeros(&[hidden]))?,
                store.add(format!("{prefix}.b_h"), Tensor::zeros(&[hidden]))?,
            ])
        } else {
            None
        };
        Ok(Self {
            input,
            hidden,
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            bias,
        })
    }

    /// Input projections `X W_gᵀ + b_g` for the three gates, each `[T×H]`.
    fn project(&self, tape: &mut Tape<'_>, b: &Binding, x: Var) -> Result<[Var; 3]> {
        let ws = [self.w_z, self.w_r, self.w_h];
        let mut out = [x; 3];
        for (g, w) in ws.into_iter().enumerate() {
            let p = tape.matmul_t(x, b.var(w))?;
            out[g] = match self.bias {
                Some(bias) => tape.add_bias(p, b.var(bias[g]))?,
                None => p,
            };
        }
        Ok(out)
    }

    /// One recurrence step from precomputed input projections (`[1×H]` each).
    fn step(&self, tape: &mut Tape<'_>, b: &Binding, proj: [Var; 3], h_prev: Var) -> Result<Var> {
        let uz = tape.matmul_t(h_prev, b.var(self.u_z))?;
        let ur = tape.matmul_t(h_prev, b.var(self.u_r))?;
        let uh = tape.matmul_t(h_prev, b.var(self.u_h))?;
        let z_pre = tape.add(proj[0], uz)?;
        let z = tape.sigmoid(z_pre)?;
        let r_pre = tape.add(proj[1], ur)?;
        let r = tape.sigmoid(r_pre)?;
        let gated = tape.hadamard(r, uh)?;
        let cand_pre = tape.add(proj[2], gated)?;
        let cand = tape.tanh(cand_pre)?;
        let keep = tape.hadamard(z, h_prev)?;
        let one_minus_z = tape.one_minus(z)?;
        let new = tape.hadamard(one_minus_z, cand)?;
        tape.add(keep, new)
    }

    fn check_input(&self, tape: &Tape<'_>, x: Var, op: &'static str) -> Result<usize> {
        let (t, i) = tape.value(x).dims2(op)?;
        if i != self.input {
            return Err(Error::Shape {
                op,
                detail: format!("input width {i}, cell expects {}", self.input),
            });
        }
        Ok(t)
    }

    fn check_state(&self, tape: &Tape<'_>, h: Var, op: &'static str) -> Result<()> {
        if tape.value(h).shape() != [1, self.hidden] {
            return Err(Error::Shape {
                op,
                detail: format!("state {:?}, expected [1, {}]", tape.value(h).shape(), self.hidden),
            });
        }
        Ok(())
    }
}

/// `x_t: [1×I]`, `h_prev: [1×H]` → `[1×H]`.
pub fn gru_cell_step(tape: &mut Tape<'_>, b: &Binding, cell: &GruCell, x_t: Var, h_prev: Var) -> Result<Var> {
    let t = cell.check_input(tape, x_t, "gru_cell_step")?;
    if t != 1 {
        return Err(Error::Shape {
            op: "gru_cell_step",
            detail: format!("expected a single row, got {t}"),
        });
    }
    cell.check_state(tape, h_prev, "gru_cell_step")?;
    let proj = cell.project(tape, b, x_t)?;
    cell.step(tape, b, proj, h_prev)
}

/// Runs the cell over the rows of `seq: [T×I]`, returning all states `[T×H]`.
/// `h0` defaults to zeros.
pub fn gru_forward(
    tape: &mut Tape<'_>,
    b: &Binding,
    cell: &GruCell,
    seq: Var,
    h0: Option<Var>,
) -> Result<Var> {
    let steps = cell.check_input(tape, seq, "gru_forward")?;
    if steps == 0 {
        return Err(Error::EmptySequence);
    }
    let mut h = match h0 {
        Some(h) => {
            cell.check_state(tape, h, "gru_forward")?;
            h
        }
        None => tape.constant(Tensor::zeros(&[1, cell.hidden])),
    };
    let proj = cell.project(tape, b, seq)?;
    let mut states = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut p = proj;
        for v in p.iter_mut() {
            *v = tape.slice(*v, 0, t, t + 1)?;
        }
        h = cell.step(tape, b, p, h)?;
        states.push(h);
    }
    tape.concat(&states, 0)
}

/// Forward states alongside re-reversed backward states: `[T×2H]`.
pub fn bi_gru(tape: &mut Tape<'_>, b: &Binding, p: &BiGru, seq: Var) -> Result<Var> {
    let fwd = gru_forward(tape, b, &p.forward, seq, None)?;
    let rev = tape.reverse_rows(seq)?;
    let bwd_rev = gru_forward(tape, b, &p.backward, rev, None)?;
    let bwd = tape.reverse_rows(bwd_rev)?;
    tape.concat(&[fwd, bwd], 1)
}

/// Max-over-time followed by avg-over-time: `[T×C]` → `[2C]`.
pub fn pool_states(tape: &mut Tape<'_>, states: Var) -> Result<Var> {
    let mx = tape.max_over_time(states)?;
    let av = tape.avg_over_time(states)?;
    tape.concat(&[mx, av], 0)
}

impl ConvBank {
    pub fn register(
        store: &mut ParamStore,
        init: &mut Init,
        prefix: &str,
        kernel_sizes: &[usize],
        filters: usize,
        depth: usize,
    ) -> Result<Self> {
        let mut banks = Vec::with_capacity(kernel_sizes.len());
        for &k in kernel_sizes {
            let kern = init.glorot(&[filters, k, depth], k * depth, k * filters);
            let kid = store.add(format!("{prefix}.k{k}.kernels"), kern)?;
            let bid = store.add(format!("{prefix}.k{k}.bias"), Tensor::zeros(&[filters]))?;
            banks.push((k, kid, bid));
        }
        Ok(Self { banks })
    }

    pub fn max_kernel(&self) -> usize {
        self.banks.iter().map(|b| b.0).max().unwrap_or(0)
    }
}

/// For each kernel size in order: convolution, relu, max over time; the
/// per-filter maxima are concatenated.
pub fn conv_features(tape: &mut Tape<'_>, b: &Binding, bank: &ConvBank, matrix: Var) -> Result<Var> {
    let (l, _) = tape.value(matrix).dims2("conv_features")?;
    if l < bank.max_kernel() {
        return Err(Error::Shape {
            op: "conv_features",
            detail: format!("sequence length {l} shorter than kernel {}", bank.max_kernel()),
        });
    }
    let mut parts = Vec::with_capacity(bank.banks.len());
    for &(_, kernels, bias) in &bank.banks {
        let c = tape.conv1d(matrix, b.var(kernels), b.var(bias))?;
        let r = tape.relu(c)?;
        parts.push(tape.max_over_time(r)?);
    }
    tape.concat(&parts, 0)
}

impl Dense {
    pub fn register(store: &mut ParamStore, init: &mut Init, prefix: &str, input: usize, output: usize) -> Result<Self> {
        let w = init.glorot(&[output, input], input, output);
        Ok(Self {
            weight: store.add(format!("{prefix}.weight"), w)?,
            bias: store.add(format!("{prefix}.bias"), Tensor::zeros(&[output]))?,
        })
    }

    /// `x: [1×in]` → `[1×out]`.
    pub fn apply(&self, tape: &mut Tape<'_>, b: &Binding, x: Var) -> Result<Var> {
        let y = tape.matmul_t(x, b.var(self.weight))?;
        tape.add_bias(y, b.var(self.bias))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct BranchA {
    alpha: Option<ParamId>,
    rnn: BiGru,
    dense: Dense,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct BranchB {
    rnn: Option<BiGru>,
    conv: Option<ConvBank>,
    dense: Dense,
}

/// Inputs for one prediction. A disabled branch ignores its input.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelInput {
    /// `[pairs × 4·hidden]`.
    pub fused: Option<Tensor>,
    /// `[L × D]`.
    pub emb: Option<Tensor>,
}

impl From<&FusedSequence> for Tensor {
    fn from(f: &FusedSequence) -> Self {
        Tensor::new(vec![f.rows, f.cols], f.data.clone()).expect("fused sequence shape")
    }
}

impl From<&EmbeddingMatrix> for Tensor {
    fn from(m: &EmbeddingMatrix) -> Self {
        Tensor::new(vec![m.rows, m.cols], m.data.clone()).expect("embedding matrix shape")
    }
}

/// All trainable state plus the structure that routes it.
#[derive(Debug, Clone, PartialEq)]
pub struct IbenModel {
    config: ModelConfig,
    params: ParamStore,
    branch_a: Option<BranchA>,
    branch_b: Option<BranchB>,
    head: Dense,
}

impl IbenModel {
    /// Registers and initializes every parameter from `seed`. Registration
    /// order is fixed, so the same config and seed give identical values.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        let mut init = Init::new(seed);
        let h = config.gru_hidden;
        let bias = config.gate_bias;
        let mut head_in = 0;

        let branch_a = if config.branches.bert() {
            let alpha = if config.learnable_alpha {
                let init_vals = config
                    .alpha_init
                    .clone()
                    .unwrap_or_else(|| vec![1.0; config.n_pairs]);
                Some(params.add("a.alpha", Tensor::vector(init_vals))?)
            } else {
                None
            };
            let rnn = BiGru {
                forward: GruCell::register(&mut params, &mut init, "a.gru.fwd", config.bert_input_dim, h, bias)?,
                backward: GruCell::register(&mut params, &mut init, "a.gru.bwd", config.bert_input_dim, h, bias)?,
            };
            let dense = Dense::register(&mut params, &mut init, "a.dense", 4 * h, config.dense_width)?;
            head_in += config.dense_width;
            Some(BranchA { alpha, rnn, dense })
        } else {
            None
        };

        let branch_b = if config.branches.emb() {
            let d = config.emb_input_dim;
            let mut width = 0;
            let rnn = if config.emb_sub.rnn() {
                width += 4 * h;
                Some(BiGru {
                    forward: GruCell::register(&mut params, &mut init, "b.gru.fwd", d, h, bias)?,
                    backward: GruCell::register(&mut params, &mut init, "b.gru.bwd", d, h, bias)?,
                })
            } else {
                None
            };
            let conv = if config.emb_sub.conv() {
                width += config.conv_width();
                Some(ConvBank::register(
                    &mut params,
                    &mut init,
                    "b.conv",
                    &config.kernel_sizes,
                    config.filters_per_kernel,
                    d,
                )?)
            } else {
                None
            };
            let dense = Dense::register(&mut params, &mut init, "b.dense", width, config.dense_width)?;
            head_in += config.dense_width;
            Some(BranchB { rnn, conv, dense })
        } else {
            None
        };

        let head = Dense::register(&mut params, &mut init, "head", head_in, 1)?;
        Ok(Self {
            config,
            params,
            branch_a,
            branch_b,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Width of the head input (sum of enabled branch widths).
    pub fn head_input_width(&self) -> usize {
        self.params.get(self.head.weight).value.shape()[1]
    }

    /// Builds the prediction on `tape` and returns a `[1]` var.
    pub fn forward_on_tape(&self, tape: &mut Tape<'_>, b: &Binding, input: &ModelInput) -> Result<Var> {
        let mut parts = Vec::with_capacity(2);
        if let Some(a) = &self.branch_a {
            let fused = input
                .fused
                .clone()
                .ok_or_else(|| Error::Invalid("branch A is enabled but no fused sequence was given".into()))?;
            let mut x = tape.constant(fused);
            if let Some(alpha) = a.alpha {
                x = tape.scale_rows(x, b.var(alpha))?;
            }
            let states = bi_gru(tape, b, &a.rnn, x)?;
            let pooled = pool_states(tape, states)?;
            let n = tape.value(pooled).len();
            let row = tape.reshape(pooled, &[1, n])?;
            parts.push(self.dense_out(tape, b, &a.dense, row)?);
        }
        if let Some(bb) = &self.branch_b {
            let emb = input
                .emb
                .clone()
                .ok_or_else(|| Error::Invalid("branch B is enabled but no embedding matrix was given".into()))?;
            let x = tape.constant(emb);
            let mut feats = Vec::with_capacity(2);
            if let Some(rnn) = &bb.rnn {
                let states = bi_gru(tape, b, rnn, x)?;
                feats.push(pool_states(tape, states)?);
            }
            if let Some(conv) = &bb.conv {
                feats.push(conv_features(tape, b, conv, x)?);
            }
            let joined = tape.concat(&feats, 0)?;
            let n = tape.value(joined).len();
            let row = tape.reshape(joined, &[1, n])?;
            parts.push(self.dense_out(tape, b, &bb.dense, row)?);
        }
        let joined = tape.concat(&parts, 1)?;
        let out = self.head.apply(tape, b, joined)?;
        tape.reshape(out, &[1])
    }

    fn dense_out(&self, tape: &mut Tape<'_>, b: &Binding, d: &Dense, x: Var) -> Result<Var> {
        let y = d.apply(tape, b, x)?;
        if self.config.dense_relu {
            tape.relu(y)
        } else {
            Ok(y)
        }
    }

    /// Prediction on the current parameter snapshot.
    pub fn predict(&self, input: &ModelInput) -> Result<f64> {
        let mut tape = Tape::new();
        let b = self.params.bind(&mut tape);
        let y = self.forward_on_tape(&mut tape, &b, input)?;
        Ok(tape.value(y).item())
    }

    /// Ids of every parameter with its name, in registration order.
    pub fn param_names(&self) -> Vec<String> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(branches: Branches, emb_sub: EmbSubModel) -> ModelConfig {
        ModelConfig {
            branches,
            emb_sub,
            bert_input_dim: 8,
            n_pairs: 2,
            emb_input_dim: 4,
            gru_hidden: 3,
            dense_width: 5,
            kernel_sizes: vec![1, 2, 3, 4],
            filters_per_kernel: 2,
            ..ModelConfig::default()
        }
    }

    fn input(seed: f64) -> ModelInput {
        let fused = (0..16).map(|i| libm::sin(seed + i as f64)).collect();
        let emb = (0..20).map(|i| libm::cos(seed + 0.5 * i as f64)).collect();
        ModelInput {
            fused: Some(Tensor::matrix(2, 8, fused).unwrap()),
            emb: Some(Tensor::matrix(5, 4, emb).unwrap()),
        }
    }

    #[test]
    fn default_config_matches_reference_hyperparameters() {
        let c = ModelConfig::default();
        assert_eq!(c.kernel_sizes, vec![1, 2, 3, 4]);
        assert_eq!(c.conv_width(), 36);
        assert_eq!(c.gru_hidden, 128);
        assert_eq!(c.dense_width, 64);
    }

    #[test]
    fn zero_cell_examples() {
        let mut store = ParamStore::new();
        let mut init = Init::new(0);
        let cell = GruCell::register(&mut store, &mut init, "c", 2, 3, true).unwrap();
        for p in store.iter_mut() {
            p.value.data_mut().fill(0.0);
        }
        let mut tape = Tape::new();
        let b = store.bind(&mut tape);
        let x = tape.constant(Tensor::matrix(1, 2, vec![0.7, -1.1]).unwrap());
        let h0 = tape.constant(Tensor::zeros(&[1, 3]));
        let h = gru_cell_step(&mut tape, &b, &cell, x, h0).unwrap();
        assert_eq!(tape.value(h).data(), &[0.0; 3]);
        let hp = tape.constant(Tensor::matrix(1, 3, vec![0.4, -0.8, 1.0]).unwrap());
        let h = gru_cell_step(&mut tape, &b, &cell, x, hp).unwrap();
        assert_eq!(tape.value(h).data(), &[0.2, -0.4, 0.5]);

        // zero parameters: row t = 0.5^(t+1) · h0
        let seq = tape.constant(Tensor::matrix(3, 2, vec![1.0; 6]).unwrap());
        let states = gru_forward(&mut tape, &b, &cell, seq, Some(hp)).unwrap();
        let v = tape.value(states).data();
        for t in 0..3 {
            let f = libm::pow(0.5, (t + 1) as f64);
            assert_eq!(&v[t * 3..t * 3 + 3], &[0.4 * f, -0.8 * f, 1.0 * f]);
        }
        assert!(gru_cell_step(&mut tape, &b, &cell, seq, hp).is_err());
    }

    #[test]
    fn zero_model_predicts_zero() {
        let mut m = IbenModel::new(tiny(Branches::Both, EmbSubModel::Both), 3).unwrap();
        for p in m.params_mut().iter_mut() {
            p.value.data_mut().fill(0.0);
        }
        assert_eq!(m.predict(&input(0.0)).unwrap(), 0.0);
    }

    #[test]
    fn head_width_follows_enabled_branches() {
        let c = tiny(Branches::Emb, EmbSubModel::BiGru);
        let m = IbenModel::new(c.clone(), 1).unwrap();
        assert_eq!(m.head_input_width(), c.dense_width);
        assert!(m.params().find("b.conv.k1.kernels").is_none());
        assert!(m.params().find("a.gru.fwd.w_z").is_none());
        let both = IbenModel::new(tiny(Branches::Both, EmbSubModel::Both), 1).unwrap();
        assert_eq!(both.head_input_width(), 10);
    }

    #[test]
    fn disabled_branch_ignores_its_input() {
        let m = IbenModel::new(tiny(Branches::Emb, EmbSubModel::Both), 5).unwrap();
        let a = input(0.0);
        let mut b = a.clone();
        b.fused = Some(Tensor::full(&[2, 8], 9.0));
        assert_eq!(m.predict(&a).unwrap().to_bits(), m.predict(&b).unwrap().to_bits());
        b.fused = None;
        assert_eq!(m.predict(&a).unwrap().to_bits(), m.predict(&b).unwrap().to_bits());

        let m = IbenModel::new(tiny(Branches::Bert, EmbSubModel::Both), 5).unwrap();
        let mut c = a.clone();
        c.emb = None;
        assert_eq!(m.predict(&a).unwrap().to_bits(), m.predict(&c).unwrap().to_bits());
        c.fused = None;
        assert!(m.predict(&c).is_err());
    }

    #[test]
    fn seeded_init_is_reproducible() {
        let a = IbenModel::new(tiny(Branches::Both, EmbSubModel::Both), 11).unwrap();
        let b = IbenModel::new(tiny(Branches::Both, EmbSubModel::Both), 11).unwrap();
        let c = IbenModel::new(tiny(Branches::Both, EmbSubModel::Both), 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn conv_rejects_short_sequences() {
        let m = IbenModel::new(tiny(Branches::Emb, EmbSubModel::Cnn), 1).unwrap();
        let short = ModelInput {
            fused: None,
            emb: Some(Tensor::zeros(&[3, 4])),
        };
        assert!(matches!(m.predict(&short), Err(Error::Shape { op: "conv_features", .. })));
    }

    #[test]
    fn config_validation() {
        let mut c = tiny(Branches::Bert, EmbSubModel::Both);
        c.learnable_alpha = true;
        c.alpha_init = Some(vec![1.0]);
        assert!(IbenModel::new(c.clone(), 0).is_err());
        c.alpha_init = Some(vec![0.5, 2.0]);
        let m = IbenModel::new(c, 0).unwrap();
        let id = m.params().find("a.alpha").unwrap();
        assert_eq!(m.params().get(id).value.data(), &[0.5, 2.0]);
        let mut c = tiny(Branches::Emb, EmbSubModel::Cnn);
        c.kernel_sizes = vec![];
        assert!(IbenModel::new(c, 0).is_err());
    }
}
