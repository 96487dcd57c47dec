use alloc::borrow::Cow;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::Tensor;
use crate::error::{shape_err, Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul { a: Var, b: Var, trans_b: bool },
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    AddBias { x: Var, bias: Var },
    ScaleRows { x: Var, weights: Var },
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Slice { input: Var, axis: usize, start: usize },
    Reshape(Var),
    ReverseRows(Var),
    Conv1d { input: Var, kernels: Var, bias: Var },
    MaxOverTime { input: Var, argmax: Vec<usize> },
    AvgOverTime(Var),
    Sum(Var),
    Mse { pred: Var, target: Var },
    MaeSum { pred: Var, target: Var },
}

#[derive(Debug)]
struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Records operations in execution order for a single reverse sweep.
///
/// Leaves may borrow their values (parameters) or own them (inputs).
#[derive(Debug, Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients of one reverse sweep, indexed by [`Var`]. Only nodes that
/// require gradients and were reached by the sweep have an entry.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }
}

fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
    (
        shape[..axis].iter().product(),
        shape[axis + 1..].iter().product(),
    )
}

/// `out += a · b` (or `a · bᵀ`), all row-major.
fn gemm_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize, trans_b: bool) {
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        let ai = &a[i * k..(i + 1) * k];
        if trans_b {
            for (j, o) in row.iter_mut().enumerate() {
                let bj = &b[j * k..(j + 1) * k];
                *o += ai.iter().zip(bj).map(|(x, y)| x * y).sum::<f64>();
            }
        } else {
            for (p, &av) in ai.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let bp = &b[p * n..(p + 1) * n];
                row.iter_mut().zip(bp).for_each(|(o, &bv)| *o += av * bv);
            }
        }
    }
}

/// `out += aᵀ · b` with `a: [m×k]`, `b: [m×n]`, `out: [k×n]`.
fn gemm_tn_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let ai = &a[i * k..(i + 1) * k];
        let bi = &b[i * n..(i + 1) * n];
        for (p, &av) in ai.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let row = &mut out[p * n..(p + 1) * n];
            row.iter_mut().zip(bi).for_each(|(o, &bv)| *o += av * bv);
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A constant input; no gradient is tracked.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf whose gradient is tracked, borrowing its value.
    pub fn watch(&mut self, value: &'a Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Borrowed(value),
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// A leaf whose gradient is tracked, owning its value.
    pub fn watch_owned(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node {
            value: Cow::Owned(value),
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return shape_err(op, format!("{sa:?} vs {sb:?}"));
        }
        Ok(())
    }

    fn zip_map(&mut self, name: &'static str, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        self.same_shape(name, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        self.push(out, op, rg, name)
    }

    fn map(&mut self, name: &'static str, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let vx = self.value(x);
        let out = Tensor::new(vx.shape().to_vec(), vx.data().iter().map(|&v| f(v)).collect())?;
        let rg = self.rg(x);
        self.push(out, op, rg, name)
    }

    /// `a · b` for `a: [m×k]`, `b: [k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, false)
    }

    /// `a · bᵀ` for `a: [m×k]`, `b: [n×k]`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&mut self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let (m, k) = self.value(a).dims2("matmul")?;
        let (br, bc) = self.value(b).dims2("matmul")?;
        let (kb, n) = if trans_b { (bc, br) } else { (br, bc) };
        if k != kb {
            return shape_err("matmul", format!("inner dimensions {k} vs {kb}"));
        }
        let mut out = vec![0.0; m * n];
        gemm_acc(&mut out, self.value(a).data(), self.value(b).data(), m, k, n, trans_b);
        let rg = self.rg(a) || self.rg(b);
        self.push(Tensor::matrix(m, n, out)?, Op::MatMul { a, b, trans_b }, rg, "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("add", a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("sub", a, b, Op::Sub(a, b), |x, y| x - y)
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_map("hadamard", a, b, Op::Hadamard(a, b), |x, y| x * y)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.map("scale", x, Op::Scale(x, c), |v| c * v)
    }

    /// `1 − x`.
    pub fn one_minus(&mut self, x: Var) -> Result<Var> {
        self.map("one_minus", x, Op::OneMinus(x), |v| 1.0 - v)
    }

    /// Adds `bias: [n]` to every length-`n` row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (vx, vb) = (self.value(x), self.value(bias));
        let n = vb.len();
        if vb.rank() != 1 || vx.shape().last() != Some(&n) {
            return shape_err("add_bias", format!("{:?} + bias {:?}", vx.shape(), vb.shape()));
        }
        let mut data = vx.data().to_vec();
        for row in data.chunks_exact_mut(n) {
            row.iter_mut().zip(vb.data()).for_each(|(o, b)| *o += b);
        }
        let out = Tensor::new(vx.shape().to_vec(), data)?;
        let rg = self.rg(x) || self.rg(bias);
        self.push(out, Op::AddBias { x, bias }, rg, "add_bias")
    }

    /// Multiplies row `i` of `x: [p×c]` by `weights[i]`.
    pub fn scale_rows(&mut self, x: Var, weights: Var) -> Result<Var> {
        let (p, c) = self.value(x).dims2("scale_rows")?;
        let vw = self.value(weights);
        if vw.shape() != [p] {
            return shape_err("scale_rows", format!("{p} rows, weights {:?}", vw.shape()));
        }
        let mut data = self.value(x).data().to_vec();
        for (row, &w) in data.chunks_exact_mut(c).zip(vw.data()) {
            row.iter_mut().for_each(|v| *v *= w);
        }
        let rg = self.rg(x) || self.rg(weights);
        self.push(Tensor::matrix(p, c, data)?, Op::ScaleRows { x, weights }, rg, "scale_rows")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.map("sigmoid", x, Op::Sigmoid(x), sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        self.map("tanh", x, Op::Tanh(x), libm::tanh)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.map("relu", x, Op::Relu(x), |v| if v > 0.0 { v } else { 0.0 })
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = match inputs.first() {
            Some(&v) => self.value(v).shape().to_vec(),
            None => return shape_err("concat", "no inputs".into()),
        };
        if axis >= first.len() {
            return shape_err("concat", format!("axis {axis} for rank {}", first.len()));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.value(v).shape();
            let compatible = s.len() == first.len()
                && s.iter().zip(&first).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !compatible {
                return shape_err("concat", format!("{s:?} vs {first:?} on axis {axis}"));
            }
            total += s[axis];
        }
        let mut shape = first.clone();
        shape[axis] = total;
        let (outer, inner) = outer_inner(&shape, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let t = self.value(v);
                let block = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * block..(o + 1) * block]);
            }
        }
        let rg = inputs.iter().any(|&v| self.rg(v));
        let op = Op::Concat {
            inputs: inputs.to_vec(),
            axis,
        };
        self.push(Tensor::new(shape, data)?, op, rg, "concat")
    }

    /// Elements `start..end` along `axis`.
    pub fn slice(&mut self, input: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let shape = self.value(input).shape().to_vec();
        if axis >= shape.len() || start > end || end > shape[axis] {
            return shape_err("slice", format!("{start}..{end} on axis {axis} of {shape:?}"));
        }
        let (outer, inner) = outer_inner(&shape, axis);
        let src = self.value(input).data();
        let mut data = Vec::with_capacity(outer * (end - start) * inner);
        for o in 0..outer {
            let base = o * shape[axis] * inner;
            data.extend_from_slice(&src[base + start * inner..base + end * inner]);
        }
        let mut out_shape = shape;
        out_shape[axis] = end - start;
        let rg = self.rg(input);
        self.push(
            Tensor::new(out_shape, data)?,
            Op::Slice { input, axis, start },
            rg,
            "slice",
        )
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let vx = self.value(x);
        let n: usize = shape.iter().product();
        if n != vx.len() {
            return shape_err("reshape", format!("{:?} to {shape:?}", vx.shape()));
        }
        let out = Tensor::new(shape.to_vec(), vx.data().to_vec())?;
        let rg = self.rg(x);
        self.push(out, Op::Reshape(x), rg, "reshape")
    }

    /// Reverses the row order of a matrix.
    pub fn reverse_rows(&mut self, x: Var) -> Result<Var> {
        let (r, c) = self.value(x).dims2("reverse_rows")?;
        let src = self.value(x).data();
        let data = (0..r).rev().flat_map(|i| src[i * c..(i + 1) * c].iter().copied()).collect();
        let rg = self.rg(x);
        self.push(Tensor::matrix(r, c, data)?, Op::ReverseRows(x), rg, "reverse_rows")
    }

    /// Valid 1-D convolution over the rows of `input: [L×D]` with
    /// `kernels: [F×k×D]` and `bias: [F]`, giving `[(L−k+1)×F]`.
    pub fn conv1d(&mut self, input: Var, kernels: Var, bias: Var) -> Result<Var> {
        let (l, d) = self.value(input).dims2("conv1d")?;
        let (f, k, kd) = match self.value(kernels).shape()[..] {
            [f, k, kd] => (f, k, kd),
            ref s => return shape_err("conv1d", format!("kernels must be [F×k×D], got {s:?}")),
        };
        if kd != d || k == 0 {
            return shape_err("conv1d", format!("kernel depth {kd} vs input width {d}"));
        }
        if self.value(bias).shape() != [f] {
            return shape_err("conv1d", format!("bias {:?} for {f} filters", self.value(bias).shape()));
        }
        if k > l {
            return shape_err("conv1d", format!("kernel size {k} exceeds sequence length {l}"));
        }
        let steps = l - k + 1;
        let (x, w, b) = (
            self.value(input).data(),
            self.value(kernels).data(),
            self.value(bias).data(),
        );
        let window = k * d;
        let mut out = vec![0.0; steps * f];
        for t in 0..steps {
            let xs = &x[t * d..t * d + window];
            for fi in 0..f {
                let ws = &w[fi * window..(fi + 1) * window];
                out[t * f + fi] = b[fi] + xs.iter().zip(ws).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        let rg = self.rg(input) || self.rg(kernels) || self.rg(bias);
        self.push(
            Tensor::matrix(steps, f, out)?,
            Op::Conv1d {
                input,
                kernels,
                bias,
            },
            rg,
            "conv1d",
        )
    }

    /// Column-wise maximum of `[L×D]`; ties go to the first row.
    pub fn max_over_time(&mut self, input: Var) -> Result<Var> {
        let (l, d) = self.value(input).dims2("max_over_time")?;
        if l == 0 {
            return shape_err("max_over_time", "empty sequence".into());
        }
        let x = self.value(input).data();
        let mut argmax = vec![0usize; d];
        let mut out = x[..d].to_vec();
        for t in 1..l {
            for c in 0..d {
                let v = x[t * d + c];
                if v > out[c] {
                    out[c] = v;
                    argmax[c] = t;
                }
            }
        }
        let rg = self.rg(input);
        self.push(Tensor::vector(out), Op::MaxOverTime { input, argmax }, rg, "max_over_time")
    }

    /// Column-wise mean of `[L×D]`.
    pub fn avg_over_time(&mut self, input: Var) -> Result<Var> {
        let (l, d) = self.value(input).dims2("avg_over_time")?;
        if l == 0 {
            return shape_err("avg_over_time", "empty sequence".into());
        }
        let x = self.value(input).data();
        let mut out = vec![0.0; d];
        for row in x.chunks_exact(d) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out.iter_mut().for_each(|o| *o /= l as f64);
        let rg = self.rg(input);
        self.push(Tensor::vector(out), Op::AvgOverTime(input), rg, "avg_over_time")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg, "sum")
    }

    /// `(1/n) Σ (pred − target)²`.
    pub fn mse_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.check_loss_shapes("mse_loss", pred, target)?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let s = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / p.len() as f64;
        let rg = self.rg(pred) || self.rg(target);
        self.push(Tensor::scalar(s), Op::Mse { pred, target }, rg, "mse_loss")
    }

    /// `Σ |pred − target|`; the subgradient at zero is zero.
    pub fn mae_sum_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.check_loss_shapes("mae_sum_loss", pred, target)?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let s = p.iter().zip(t).map(|(a, b)| (a - b).abs()).sum();
        let rg = self.rg(pred) || self.rg(target);
        self.push(Tensor::scalar(s), Op::MaeSum { pred, target }, rg, "mae_sum_loss")
    }

    fn check_loss_shapes(&self, op: &'static str, pred: Var, target: Var) -> Result<()> {
        let (p, t) = (self.value(pred), self.value(target));
        if p.len() != t.len() || p.is_empty() {
            return shape_err(op, format!("{:?} vs {:?}", p.shape(), t.shape()));
        }
        Ok(())
    }

    /// Reverse sweep from a one-element `loss`, seeded with 1.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return shape_err(
                "backward",
                format!("loss must have one element, got {:?}", self.value(loss).shape()),
            );
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let g = match grads[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(&node.op, &node.value, &g, &mut grads);
        }
        if grads.iter().flatten().flatten().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { op: "backward" });
        }
        Ok(Gradients { grads })
    }

    fn buf<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.rg(v) {
            return None;
        }
        let len = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match *op {
            Op::Leaf => {}
            Op::MatMul { a, b, trans_b } => {
                let (va, vb) = (self.value(a), self.value(b));
                let (m, k) = (va.shape()[0], va.shape()[1]);
                let n = out.shape()[1];
                if let Some(ga) = self.buf(grads, a) {
                    // dA = dC · Bᵀ (or dC · B when B was transposed)
                    gemm_acc(ga, g, vb.data(), m, n, k, !trans_b);
                }
                if let Some(gb) = self.buf(grads, b) {
                    if trans_b {
                        // dB = dCᵀ · A, [n×k]
                        gemm_tn_acc(gb, g, va.data(), m, n, k);
                    } else {
                        // dB = Aᵀ · dC, [k×n]
                        gemm_tn_acc(gb, va.data(), g, m, k, n);
                    }
                }
            }
            Op::Add(a, b) => {
                if let Some(ga) = self.buf(grads, a) {
                    ga.iter_mut().zip(g).for_each(|(o, d)| *o += d);
                }
                if let Some(gb) = self.buf(grads, b) {
                    gb.iter_mut().zip(g).for_each(|(o, d)| *o += d);
                }
            }
            Op::Sub(a, b) => {
                if let Some(ga) = self.buf(grads, a) {
                    ga.iter_mut().zip(g).for_each(|(o, d)| *o += d);
                }
                if let Some(gb) = self.buf(grads, b) {
                    gb.iter_mut().zip(g).for_each(|(o, d)| *o -= d);
                }
            }
            Op::Hadamard(a, b) => {
                let (va, vb) = (self.value(a).data(), self.value(b).data());
                if let Some(ga) = self.buf(grads, a) {
                    for ((o, d), y) in ga.iter_mut().zip(g).zip(vb) {
                        *o += d * y;
                    }
                }
                if let Some(gb) = self.buf(grads, b) {
                    for ((o, d), x) in gb.iter_mut().zip(g).zip(va) {
                        *o += d * x;
                    }
                }
            }
            Op::Scale(x, c) => {
                if let Some(gx) = self.buf(grads, x) {
                    gx.iter_mut().zip(g).for_each(|(o, d)| *o += c * d);
                }
            }
            Op::OneMinus(x) => {
                if let Some(gx) = self.buf(grads, x) {
                    gx.iter_mut().zip(g).for_each(|(o, d)| *o -= d);
                }
            }
            Op::AddBias { x, bias } => {
                if let Some(gx) = self.buf(grads, x) {
                    gx.iter_mut().zip(g).for_each(|(o, d)| *o += d);
                }
                if let Some(gb) = self.buf(grads, bias) {
                    let n = gb.len();
                    for row in g.chunks_exact(n) {
                        gb.iter_mut().zip(row).for_each(|(o, d)| *o += d);
                    }
                }
            }
            Op::ScaleRows { x, weights } => {
                let c = out.shape()[1];
                let (vx, vw) = (self.value(x).data(), self.value(weights).data());
                if let Some(gx) = self.buf(grads, x) {
                    for ((orow, grow), &w) in gx.chunks_exact_mut(c).zip(g.chunks_exact(c)).zip(vw) {
                        orow.iter_mut().zip(grow).for_each(|(o, d)| *o += w * d);
                    }
                }
                if let Some(gw) = self.buf(grads, weights) {
                    for ((o, grow), xrow) in gw.iter_mut().zip(g.chunks_exact(c)).zip(vx.chunks_exact(c)) {
                        *o += grow.iter().zip(xrow).map(|(d, v)| d * v).sum::<f64>();
                    }
                }
            }
            Op::Sigmoid(x) => {
                if let Some(gx) = self.buf(grads, x) {
                    for ((o, d), s) in gx.iter_mut().zip(g).zip(out.data()) {
                        *o += d * s * (1.0 - s);
                    }
                }
            }
            Op::Tanh(x) => {
                if let Some(gx) = self.buf(grads, x) {
                    for ((o, d), t) in gx.iter_mut().zip(g).zip(out.data()) {
                        *o += d * (1.0 - t * t);
                    }
                }
            }
            Op::Relu(x) => {
                let vx = self.value(x).data();
                if let Some(gx) = self.buf(grads, x) {
                    for ((o, d), v) in gx.iter_mut().zip(g).zip(vx) {
                        if *v > 0.0 {
                            *o += d;
                        }
                    }
                }
            }
            Op::Concat { ref inputs, axis } => {
                let (outer, inner) = outer_inner(out.shape(), axis);
                let total = out.shape()[axis];
                let mut offset = 0;
                for &v in inputs {
                    let width = self.value(v).shape()[axis];
                    if let Some(gv) = self.buf(grads, v) {
                        let block = width * inner;
                        for o in 0..outer {
                            let src = &g[o * total * inner + offset * inner..][..block];
                            gv[o * block..(o + 1) * block]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(a, d)| *a += d);
                        }
                    }
                    offset += width;
                }
            }
            Op::Slice { input, axis, start } => {
                let in_shape = self.value(input).shape();
                let (outer, inner) = outer_inner(in_shape, axis);
                let width = out.shape()[axis];
                let full = in_shape[axis];
                if let Some(gi) = self.buf(grads, input) {
                    let block = width * inner;
                    for o in 0..outer {
                        let dst = &mut gi[o * full * inner + start * inner..][..block];
                        dst.iter_mut()
                            .zip(&g[o * block..(o + 1) * block])
                            .for_each(|(a, d)| *a += d);
                    }
                }
            }
            Op::Reshape(x) => {
                if let Some(gx) = self.buf(grads, x) {
                    gx.iter_mut().zip(g).for_each(|(o, d)| *o += d);
                }
            }
            Op::ReverseRows(x) => {
                let (r, c) = (out.shape()[0], out.shape()[1]);
                if let Some(gx) = self.buf(grads, x) {
                    for i in 0..r {
                        let src = &g[(r - 1 - i) * c..(r - i) * c];
                        gx[i * c..(i + 1) * c]
                            .iter_mut()
                            .zip(src)
                            .for_each(|(o, d)| *o += d);
                    }
                }
            }
            Op::Conv1d {
                input,
                kernels,
                bias,
            } => {
                let d = self.value(input).shape()[1];
                let (f, k) = (self.value(kernels).shape()[0], self.value(kernels).shape()[1]);
                let steps = out.shape()[0];
                let window = k * d;
                let (x, w) = (self.value(input).data(), self.value(kernels).data());
                if let Some(gx) = self.buf(grads, input) {
                    for t in 0..steps {
                        let dst = &mut gx[t * d..t * d + window];
                        for fi in 0..f {
                            let dv = g[t * f + fi];
                            if dv == 0.0 {
                                continue;
                            }
                            let ws = &w[fi * window..(fi + 1) * window];
                            dst.iter_mut().zip(ws).for_each(|(o, wv)| *o += dv * wv);
                        }
                    }
                }
                if let Some(gw) = self.buf(grads, kernels) {
                    for t in 0..steps {
                        let xs = &x[t * d..t * d + window];
                        for fi in 0..f {
                            let dv = g[t * f + fi];
                            if dv == 0.0 {
                                continue;
                            }
                            gw[fi * window..(fi + 1) * window]
                                .iter_mut()
                                .zip(xs)
                                .for_each(|(o, xv)| *o += dv * xv);
                        }
                    }
                }
                if let Some(gb) = self.buf(grads, bias) {
                    for row in g.chunks_exact(f) {
                        gb.iter_mut().zip(row).for_each(|(o, dv)| *o += dv);
                    }
                }
            }
            Op::MaxOverTime { input, ref argmax } => {
                let d = argmax.len();
                if let Some(gi) = self.buf(grads, input) {
                    for (c, &t) in argmax.iter().enumerate() {
                        gi[t * d + c] += g[c];
                    }
                }
            }
            Op::AvgOverTime(input) => {
                let l = self.value(input).shape()[0] as f64;
                if let Some(gi) = self.buf(grads, input) {
                    let d = g.len();
                    for row in gi.chunks_exact_mut(d) {
                        row.iter_mut().zip(g).for_each(|(o, dv)| *o += dv / l);
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(gx) = self.buf(grads, x) {
                    gx.iter_mut().for_each(|o| *o += g[0]);
                }
            }
            Op::Mse { pred, target } => {
                let (p, t) = (self.value(pred).data(), self.value(target).data());
                let n = p.len() as f64;
                if let Some(gp) = self.buf(grads, pred) {
                    for ((o, a), b) in gp.iter_mut().zip(p).zip(t) {
                        *o += g[0] * 2.0 * (a - b) / n;
                    }
                }
                if let Some(gt) = self.buf(grads, target) {
                    for ((o, a), b) in gt.iter_mut().zip(p).zip(t) {
                        *o -= g[0] * 2.0 * (a - b) / n;
                    }
                }
            }
            Op::MaeSum { pred, target } => {
                let (p, t) = (self.value(pred).data(), self.value(target).data());
                let sign = |a: f64, b: f64| {
                    if a > b {
                        1.0
                    } else if a < b {
                        -1.0
                    } else {
                        0.0
                    }
                };
                if let Some(gp) = self.buf(grads, pred) {
                    for ((o, &a), &b) in gp.iter_mut().zip(p).zip(t) {
                        *o += g[0] * sign(a, b);
                    }
                }
                if let Some(gt) = self.buf(grads, target) {
                    for ((o, &a), &b) in gt.iter_mut().zip(p).zip(t) {
                        *o -= g[0] * sign(a, b);
                    }
                }
            }
        }
    }
}
