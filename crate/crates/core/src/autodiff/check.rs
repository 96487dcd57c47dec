//! Central finite-difference gradient checking.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Binding, ParamStore, Tape, Var};
use crate::error::Result;

pub const DEFAULT_EPS: f64 = 1e-5;

/// `|a − b| / max(1e-8, |a| + |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub eps: f64,
    /// Check at most this many coordinates per parameter (chosen with
    /// `seed`); `None` checks all of them.
    pub max_coords: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: DEFAULT_EPS,
            max_coords: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub params: Vec<ParamCheck>,
}

/// Compares reverse-mode gradients of `f` against central differences
/// `(f(x+eps) − f(x−eps)) / (2·eps)` for every (or a sample of every)
/// parameter coordinate. `f` must build a one-element loss on the tape.
pub fn grad_check<F>(store: &mut ParamStore, opts: GradCheckOptions, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape<'_>, &Binding) -> Result<Var>,
{
    let analytic: Vec<Vec<f64>> = {
        let mut tape = Tape::new();
        let binding = store.bind(&mut tape);
        let loss = f(&mut tape, &binding)?;
        let grads = tape.backward(loss)?;
        store
            .iter()
            .enumerate()
            .map(|(i, p)| {
                grads
                    .get(binding.var(super::ParamId(i)))
                    .map(<[f64]>::to_vec)
                    .unwrap_or_else(|| alloc::vec![0.0; p.value.len()])
            })
            .collect()
    };

    let mut eval = |store: &ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let binding = store.bind(&mut tape);
        let loss = f(&mut tape, &binding)?;
        Ok(tape.value(loss).item())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        params: Vec::with_capacity(store.len()),
    };
    #[allow(clippy::needless_range_loop)]
    for pi in 0..store.len() {
        let id = super::ParamId(pi);
        let n = store.get(id).value.len();
        let coords: Vec<usize> = match opts.max_coords {
            Some(m) if m < n => {
                let mut v = sample(&mut rng, n, m).into_vec();
                v.sort_unstable();
                v
            }
            _ => (0..n).collect(),
        };
        let mut worst: f64 = 0.0;
        for &c in &coords {
            let orig = store.get(id).value.data()[c];
            store.get_mut(id).value.data_mut()[c] = orig + opts.eps;
            let plus = eval(store);
            store.get_mut(id).value.data_mut()[c] = orig - opts.eps;
            let minus = eval(store);
            store.get_mut(id).value.data_mut()[c] = orig;
            let numeric = (plus? - minus?) / (2.0 * opts.eps);
            worst = worst.max(relative_error(analytic[pi][c], numeric));
        }
        report.max_rel_error = report.max_rel_error.max(worst);
        report.params.push(ParamCheck {
            name: store.get(id).name.clone(),
            checked: coords.len(),
            max_rel_error: worst,
        });
    }
    Ok(report)
}
