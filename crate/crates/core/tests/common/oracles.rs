//! Straight-line reference implementations written with explicit index
//! loops, independent of the tape and of the library's pooling helpers.
#![allow(dead_code)]

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `stack[layer][token][dim]`, 1-based `pairs`. Returns one row per pair:
/// `α · [mean(a), max(a), mean(b), max(b)]`.
pub fn fuse(stack: &[Vec<Vec<f64>>], pairs: &[(usize, usize)], weights: &[f64]) -> Vec<Vec<f64>> {
    let pool = |layer: &Vec<Vec<f64>>| {
        let hidden = layer[0].len();
        let mut mean = vec![0.0; hidden];
        let mut max = vec![f64::NEG_INFINITY; hidden];
        for d in 0..hidden {
            let mut s = 0.0;
            for tok in layer {
                s += tok[d];
                if tok[d] > max[d] {
                    max[d] = tok[d];
                }
            }
            mean[d] = s / layer.len() as f64;
        }
        (mean, max)
    };
    let mut rows = Vec::new();
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let (ma, xa) = pool(&stack[a - 1]);
        let (mb, xb) = pool(&stack[b - 1]);
        let mut row = Vec::new();
        for part in [ma, xa, mb, xb] {
            for v in part {
                row.push(weights[p] * v);
            }
        }
        rows.push(row);
    }
    rows
}

/// GRU weights as nested rows: `w_*[h][i]`, `u_*[h][j]`, `b_*[h]`.
pub struct GruWeights {
    pub w: [Vec<Vec<f64>>; 3],
    pub u: [Vec<Vec<f64>>; 3],
    pub b: [Vec<f64>; 3],
}

pub fn gru_step(p: &GruWeights, x: &[f64], h: &[f64]) -> Vec<f64> {
    let hidden = h.len();
    let lin = |g: usize, k: usize, state: &[f64]| -> (f64, f64) {
        let mut wx = p.b[g][k];
        for i in 0..x.len() {
            wx += p.w[g][k][i] * x[i];
        }
        let mut uh = 0.0;
        for j in 0..hidden {
            uh += p.u[g][k][j] * state[j];
        }
        (wx, uh)
    };
    let mut out = vec![0.0; hidden];
    for k in 0..hidden {
        let (zx, zh) = lin(0, k, h);
        let (rx, rh) = lin(1, k, h);
        let (cx, ch) = lin(2, k, h);
        let z = sigmoid(zx + zh);
        let r = sigmoid(rx + rh);
        let cand = (cx + r * ch).tanh();
        out[k] = z * h[k] + (1.0 - z) * cand;
    }
    out
}

pub fn gru_sequence(p: &GruWeights, xs: &[Vec<f64>], hidden: usize) -> Vec<Vec<f64>> {
    let mut h = vec![0.0; hidden];
    let mut out = Vec::new();
    for x in xs {
        h = gru_step(p, x, &h);
        out.push(h.clone());
    }
    out
}

/// One conv bank: `kernels[f][j][d]`, `bias[f]`.
pub struct ConvKernel {
    pub kernels: Vec<Vec<Vec<f64>>>,
    pub bias: Vec<f64>,
}

/// Per bank: valid convolution, relu, max over positions; banks concatenated.
pub fn conv_features(x: &[Vec<f64>], banks: &[ConvKernel]) -> Vec<f64> {
    let mut out = Vec::new();
    for bank in banks {
        let k = bank.kernels[0].len();
        for (f, kern) in bank.kernels.iter().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for t in 0..=(x.len() - k) {
                let mut s = bank.bias[f];
                for j in 0..k {
                    for d in 0..x[0].len() {
                        s += kern[j][d] * x[t + j][d];
                    }
                }
                let r = if s > 0.0 { s } else { 0.0 };
                if r > best {
                    best = r;
                }
            }
            out.push(best);
        }
    }
    out
}

pub fn rmse(y: &[f64], p: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..y.len() {
        s += (y[i] - p[i]).powi(2);
    }
    (s / y.len() as f64).sqrt()
}

/// Bias-corrected Adam on a scalar, returning the parameter after each step.
pub fn adam_scalar(theta0: f64, grads: &[f64], lr: f64, b1: f64, b2: f64, eps: f64) -> Vec<f64> {
    let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
    let mut out = Vec::new();
    for (t, &g) in grads.iter().enumerate() {
        let t = (t + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t));
        let vh = v / (1.0 - b2.powi(t));
        theta -= lr * mh / (vh.sqrt() + eps);
        out.push(theta);
    }
    out
}
