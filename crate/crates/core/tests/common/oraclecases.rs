//! Library results against the brute-force references in [`super::oracles`].
//! Each function runs `instances` random cases and returns the worst
//! absolute difference.
#![allow(dead_code)]

use super::oracles::{self, ConvKernel, GruWeights};
use super::{rng, uniform};
use iben_core::autodiff::{ParamStore, Tape, Tensor};
use iben_core::bertfuse::{fuse, FusionMode, LayerPairing, LayerStack, LayerWeights};
use iben_core::model::{bi_gru, conv_features, gru_cell_step, gru_forward, BiGru, ConvBank, GruCell, Init};
use iben_core::train::{adam_step, evaluate_rmse, AdamState, TrainConfig};
use rand::Rng;

pub fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    let c = *t.shape().last().unwrap();
    t.data().chunks(c).map(<[f64]>::to_vec).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn randomize(store: &mut ParamStore, seed: u64) {
    let mut r = rng(seed);
    for p in store.iter_mut() {
        let shape = p.value.shape().to_vec();
        p.value = uniform(&mut r, &shape, -0.8, 0.8);
    }
}

fn gru_weights(store: &ParamStore, cell: &GruCell) -> GruWeights {
    let m = |id| rows(&store.get(id).value);
    let b = cell.bias.map_or_else(
        || [vec![0.0; cell.hidden], vec![0.0; cell.hidden], vec![0.0; cell.hidden]],
        |b| b.map(|id| store.get(id).value.data().to_vec()),
    );
    GruWeights {
        w: [m(cell.w_z), m(cell.w_r), m(cell.w_h)],
        u: [m(cell.u_z), m(cell.u_r), m(cell.u_h)],
        b,
    }
}

pub fn fusion(instances: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut r = rng(100);
    for i in 0..instances {
        let n_layers = 2 * r.gen_range(1..=4);
        let seq_len = r.gen_range(1..=6);
        let hidden = r.gen_range(1..=5);
        let data = uniform(&mut r, &[n_layers, seq_len, hidden], -2.0, 2.0);
        let stack = LayerStack::new(format!("s{i}"), n_layers, seq_len, hidden, data.data().to_vec()).unwrap();
        let nested: Vec<Vec<Vec<f64>>> = data
            .data()
            .chunks(seq_len * hidden)
            .map(|l| l.chunks(hidden).map(<[f64]>::to_vec).collect())
            .collect();
        let pairing = LayerPairing::consecutive(n_layers).unwrap();
        let weights: Vec<f64> = (0..pairing.len()).map(|_| r.gen_range(-1.5..1.5)).collect();
        let got = fuse(&stack, &pairing, &LayerWeights(weights.clone()), FusionMode::LayerSequence).unwrap();
        let want = oracles::fuse(&nested, pairing.pairs(), &weights);
        assert_eq!((got.rows, got.cols), (want.len(), 4 * hidden));
        for (p, row) in want.iter().enumerate() {
            worst = worst.max(max_abs_diff(got.row(p), row));
        }
        let summed = fuse(&stack, &pairing, &LayerWeights(weights), FusionMode::Summed).unwrap();
        let col_sum: Vec<f64> = (0..4 * hidden).map(|c| want.iter().map(|row| row[c]).sum()).collect();
        worst = worst.max(max_abs_diff(&summed.data, &col_sum));
    }
    worst
}

pub fn gru_step(instances: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut r = rng(200);
    for i in 0..instances {
        let input = r.gen_range(1..=6);
        let hidden = r.gen_range(1..=5);
        let mut store = ParamStore::new();
        let cell = GruCell::register(&mut store, &mut Init::new(i), "c", input, hidden, i % 2 == 0).unwrap();
        randomize(&mut store, 1000 + i);
        let x = uniform(&mut r, &[1, input], -2.0, 2.0);
        let h = uniform(&mut r, &[1, hidden], -1.0, 1.0);
        let mut tape = Tape::new();
        let b = store.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let hv = tape.constant(h.clone());
        let out = gru_cell_step(&mut tape, &b, &cell, xv, hv).unwrap();
        let want = oracles::gru_step(&gru_weights(&store, &cell), x.data(), h.data());
        worst = worst.max(max_abs_diff(tape.value(out).data(), &want));
    }
    worst
}

pub fn gru_sequences(instances: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut r = rng(300);
    for i in 0..instances {
        let (input, hidden, steps) = (r.gen_range(1..=4), r.gen_range(1..=4), r.gen_range(1..=7));
        let mut store = ParamStore::new();
        let mut init = Init::new(i);
        let p = BiGru {
            forward: GruCell::register(&mut store, &mut init, "f", input, hidden, true).unwrap(),
            backward: GruCell::register(&mut store, &mut init, "b", input, hidden, true).unwrap(),
        };
        randomize(&mut store, 2000 + i);
        let x = uniform(&mut r, &[steps, input], -2.0, 2.0);
        let xs = rows(&x);
        let mut tape = Tape::new();
        let b = store.bind(&mut tape);
        let xv = tape.constant(x);
        let fwd = gru_forward(&mut tape, &b, &p.forward, xv, None).unwrap();
        let both = bi_gru(&mut tape, &b, &p, xv).unwrap();

        let want_f = oracles::gru_sequence(&gru_weights(&store, &p.forward), &xs, hidden);
        let rev: Vec<_> = xs.iter().rev().cloned().collect();
        let mut want_b = oracles::gru_sequence(&gru_weights(&store, &p.backward), &rev, hidden);
        want_b.reverse();

        worst = worst.max(max_abs_diff(tape.value(fwd).data(), &want_f.concat()));
        let got = rows(tape.value(both));
        for t in 0..steps {
            worst = worst.max(max_abs_diff(&got[t][..hidden], &want_f[t]));
            worst = worst.max(max_abs_diff(&got[t][hidden..], &want_b[t]));
        }
    }
    worst
}

pub fn conv(instances: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut r = rng(400);
    for i in 0..instances {
        let depth = r.gen_range(1..=5);
        let filters = r.gen_range(1..=4);
        let kernel_sizes: Vec<usize> = (1..=r.gen_range(1..=4)).collect();
        let len = r.gen_range(kernel_sizes.len()..=8);
        let mut store = ParamStore::new();
        let bank = ConvBank::register(&mut store, &mut Init::new(i), "k", &kernel_sizes, filters, depth).unwrap();
        randomize(&mut store, 3000 + i);
        let x = uniform(&mut r, &[len, depth], -1.0, 1.0);
        let mut tape = Tape::new();
        let b = store.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let out = conv_features(&mut tape, &b, &bank, xv).unwrap();
        let refs: Vec<ConvKernel> = bank
            .banks
            .iter()
            .map(|&(k, kid, bid)| ConvKernel {
                kernels: store
                    .get(kid)
                    .value
                    .data()
                    .chunks(k * depth)
                    .map(|f| f.chunks(depth).map(<[f64]>::to_vec).collect())
                    .collect(),
                bias: store.get(bid).value.data().to_vec(),
            })
            .collect();
        let want = oracles::conv_features(&rows(&x), &refs);
        assert_eq!(tape.value(out).len(), filters * kernel_sizes.len());
        worst = worst.max(max_abs_diff(tape.value(out).data(), &want));
    }
    worst
}

pub fn rmse(instances: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut r = rng(500);
    for _ in 0..instances {
        let n = r.gen_range(1..=50);
        let y: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..3.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..4.0)).collect();
        worst = worst.max((evaluate_rmse(&p, &y).unwrap() - oracles::rmse(&y, &p)).abs());
    }
    worst
}

pub fn adam_two_steps(instances: u64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut r = rng(600);
    for _ in 0..instances {
        let theta0 = r.gen_range(-2.0..2.0);
        let grads = [r.gen_range(-3.0..3.0), r.gen_range(-3.0..3.0)];
        let cfg = TrainConfig {
            learning_rate: r.gen_range(1e-4..1e-1),
            ..TrainConfig::default()
        };
        let mut store = ParamStore::new();
        let id = store.add("theta", Tensor::vector(vec![theta0])).unwrap();
        let mut state = AdamState::new(&store);
        let want = oracles::adam_scalar(theta0, &grads, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
        for (step, &g) in grads.iter().enumerate() {
            store.get_mut(id).grad = Tensor::vector(vec![g]);
            adam_step(&mut store, &mut state, &cfg).unwrap();
            worst = worst.max((store.get(id).value.data()[0] - want[step]).abs());
        }
    }
    worst
}
