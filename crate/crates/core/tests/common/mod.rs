#![allow(dead_code, clippy::needless_range_loop)]

pub mod gradcases;
pub mod oraclecases;
pub mod oracles;

use iben_core::autodiff::{Tape, Tensor, Var};
use iben_core::Result;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let d = Uniform::new(lo, hi);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| d.sample(rng)).collect()).unwrap()
}

/// Values with magnitude in `[margin, 1 + margin)`, away from zero kinks.
pub fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize], margin: f64) -> Tensor {
    let mut t = uniform(rng, shape, -1.0, 1.0);
    for v in t.data_mut() {
        *v = v.signum() * (v.abs() + margin);
    }
    t
}

/// `Σ out ∘ w` for a fixed, shape-derived `w`, turning any op output into
/// a scalar whose gradient touches every output element differently.
pub fn project(tape: &mut Tape<'_>, out: Var) -> Result<Var> {
    let shape = tape.value(out).shape().to_vec();
    let n: usize = shape.iter().product();
    let w = (0..n).map(|i| 0.3 + (i as f64 * 1.37 + 0.11).sin()).collect();
    let w = tape.constant(Tensor::new(shape, w).unwrap());
    let h = tape.hadamard(out, w)?;
    tape.sum(h)
}
