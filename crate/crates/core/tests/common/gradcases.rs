//! Finite-difference gradient cases, grouped by what they exercise. Each case
//! reports its worst relative error and the tolerance it must meet.
#![allow(dead_code)]

use super::{away_from_zero, project, rng, uniform};
use iben_core::autodiff::{grad_check, Binding, GradCheckOptions, ParamStore, Tape, Tensor, Var};
use iben_core::model::{bi_gru, gru_cell_step, BiGru, Branches, EmbSubModel, GruCell, IbenModel, Init, ModelConfig, ModelInput};
use iben_core::Result;

pub const PRIMITIVE_TOL: f64 = 1e-6;
pub const MODEL_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct CaseResult {
    pub name: String,
    pub max_rel_error: f64,
    pub tol: f64,
}

impl CaseResult {
    pub fn ok(&self) -> bool {
        self.max_rel_error <= self.tol
    }
}

pub const GROUPS: [&str; 9] = [
    "matmul",
    "elementwise",
    "broadcast",
    "structural",
    "conv1d",
    "pooling",
    "loss",
    "gru",
    "model",
];

pub fn group(name: &str) -> Vec<CaseResult> {
    match name {
        "matmul" => matmul(),
        "elementwise" => elementwise(),
        "broadcast" => broadcast(),
        "structural" => structural(),
        "conv1d" => conv(),
        "pooling" => pooling(),
        "loss" => loss(),
        "gru" => gru(),
        "model" => model(),
        other => panic!("unknown gradient group {other}"),
    }
}

pub fn all() -> Vec<CaseResult> {
    GROUPS.iter().flat_map(|g| group(g)).collect()
}

fn check_op<F>(name: String, inputs: Vec<(&str, Tensor)>, tol: f64, op: F) -> CaseResult
where
    F: Fn(&mut Tape<'_>, &[Var]) -> Result<Var>,
{
    let mut store = ParamStore::new();
    let ids: Vec<_> = inputs
        .into_iter()
        .map(|(n, t)| store.add(n, t).unwrap())
        .collect();
    let report = grad_check(&mut store, GradCheckOptions::default(), |tape, b: &Binding| {
        let vars: Vec<Var> = ids.iter().map(|&id| b.var(id)).collect();
        let out = op(tape, &vars)?;
        project(tape, out)
    })
    .unwrap();
    CaseResult {
        name,
        max_rel_error: report.max_rel_error,
        tol,
    }
}

fn matmul() -> Vec<CaseResult> {
    let mut r = rng(1);
    let mut out = Vec::new();
    for (m, k, n) in [(1, 1, 1), (2, 3, 4), (5, 2, 3), (8, 8, 8)] {
        out.push(check_op(
            format!("matmul {m}x{k}·{k}x{n}"),
            vec![("a", uniform(&mut r, &[m, k], -1.0, 1.0)), ("b", uniform(&mut r, &[k, n], -1.0, 1.0))],
            PRIMITIVE_TOL,
            |t, v| t.matmul(v[0], v[1]),
        ));
        out.push(check_op(
            format!("matmul_t {m}x{k}·({n}x{k})ᵀ"),
            vec![("a", uniform(&mut r, &[m, k], -1.0, 1.0)), ("b", uniform(&mut r, &[n, k], -1.0, 1.0))],
            PRIMITIVE_TOL,
            |t, v| t.matmul_t(v[0], v[1]),
        ));
    }
    out
}

fn elementwise() -> Vec<CaseResult> {
    let mut r = rng(3);
    let mut out = Vec::new();
    for shape in [vec![1], vec![4], vec![3, 5], vec![2, 2, 2]] {
        let a = uniform(&mut r, &shape, -2.0, 2.0);
        let b = uniform(&mut r, &shape, -2.0, 2.0);
        let pair = || vec![("a", a.clone()), ("b", b.clone())];
        let one = || vec![("a", a.clone())];
        let s = format!("{shape:?}");
        out.push(check_op(format!("add {s}"), pair(), PRIMITIVE_TOL, |t, v| t.add(v[0], v[1])));
        out.push(check_op(format!("sub {s}"), pair(), PRIMITIVE_TOL, |t, v| t.sub(v[0], v[1])));
        out.push(check_op(format!("hadamard {s}"), pair(), PRIMITIVE_TOL, |t, v| t.hadamard(v[0], v[1])));
        out.push(check_op(format!("square {s}"), one(), PRIMITIVE_TOL, |t, v| t.hadamard(v[0], v[0])));
        out.push(check_op(format!("scale {s}"), one(), PRIMITIVE_TOL, |t, v| t.scale(v[0], -0.7)));
        out.push(check_op(format!("one_minus {s}"), one(), PRIMITIVE_TOL, |t, v| t.one_minus(v[0])));
        out.push(check_op(format!("sigmoid {s}"), one(), PRIMITIVE_TOL, |t, v| t.sigmoid(v[0])));
        out.push(check_op(format!("tanh {s}"), one(), PRIMITIVE_TOL, |t, v| t.tanh(v[0])));
        out.push(check_op(
            format!("relu {s}"),
            vec![("a", away_from_zero(&mut r, &shape, 0.05))],
            PRIMITIVE_TOL,
            |t, v| t.relu(v[0]),
        ));
        out.push(check_op(format!("sum {s}"), one(), PRIMITIVE_TOL, |t, v| t.sum(v[0])));
    }
    out
}

fn broadcast() -> Vec<CaseResult> {
    let mut r = rng(4);
    vec![
        check_op(
            "add_bias".into(),
            vec![("x", uniform(&mut r, &[5, 3], -1.0, 1.0)), ("b", uniform(&mut r, &[3], -1.0, 1.0))],
            PRIMITIVE_TOL,
            |t, v| t.add_bias(v[0], v[1]),
        ),
        check_op(
            "scale_rows".into(),
            vec![("x", uniform(&mut r, &[4, 6], -1.0, 1.0)), ("w", uniform(&mut r, &[4], -1.0, 1.0))],
            PRIMITIVE_TOL,
            |t, v| t.scale_rows(v[0], v[1]),
        ),
    ]
}

fn structural() -> Vec<CaseResult> {
    let mut r = rng(5);
    let a = uniform(&mut r, &[3, 4], -1.0, 1.0);
    let b = uniform(&mut r, &[2, 4], -1.0, 1.0);
    let c = uniform(&mut r, &[3, 2], -1.0, 1.0);
    let one = || vec![("a", a.clone())];
    vec![
        check_op("concat rows".into(), vec![("a", a.clone()), ("b", b)], PRIMITIVE_TOL, |t, v| {
            t.concat(&[v[0], v[1], v[0]], 0)
        }),
        check_op("concat cols".into(), vec![("a", a.clone()), ("c", c)], PRIMITIVE_TOL, |t, v| {
            t.concat(&[v[1], v[0]], 1)
        }),
        check_op("slice rows".into(), one(), PRIMITIVE_TOL, |t, v| t.slice(v[0], 0, 1, 3)),
        check_op("slice cols".into(), one(), PRIMITIVE_TOL, |t, v| t.slice(v[0], 1, 2, 4)),
        check_op("reshape".into(), one(), PRIMITIVE_TOL, |t, v| t.reshape(v[0], &[2, 6])),
        check_op("reverse_rows".into(), one(), PRIMITIVE_TOL, |t, v| t.reverse_rows(v[0])),
    ]
}

fn conv() -> Vec<CaseResult> {
    let mut r = rng(6);
    (1..=4)
        .map(|k| {
            check_op(
                format!("conv1d k={k}"),
                vec![
                    ("x", uniform(&mut r, &[6, 3], -1.0, 1.0)),
                    ("w", uniform(&mut r, &[2, k, 3], -1.0, 1.0)),
                    ("b", uniform(&mut r, &[2], -1.0, 1.0)),
                ],
                PRIMITIVE_TOL,
                |t, v| t.conv1d(v[0], v[1], v[2]),
            )
        })
        .collect()
}

fn pooling() -> Vec<CaseResult> {
    // Random uniform columns have well-separated maxima, so no ties.
    let mut r = rng(7);
    let mut out = Vec::new();
    for (l, d) in [(1, 3), (5, 4), (8, 2)] {
        let x = uniform(&mut r, &[l, d], -1.0, 1.0);
        out.push(check_op(format!("max_over_time {l}x{d}"), vec![("x", x.clone())], PRIMITIVE_TOL, |t, v| {
            t.max_over_time(v[0])
        }));
        out.push(check_op(format!("avg_over_time {l}x{d}"), vec![("x", x)], PRIMITIVE_TOL, |t, v| {
            t.avg_over_time(v[0])
        }));
    }
    out
}

fn loss() -> Vec<CaseResult> {
    let mut r = rng(8);
    let p = uniform(&mut r, &[5], 0.0, 3.0);
    let y = uniform(&mut r, &[5], 0.0, 3.0);
    // residuals kept away from the kink at zero
    let mut y2 = p.clone();
    for (i, v) in y2.data_mut().iter_mut().enumerate() {
        *v += if i % 2 == 0 { 0.5 } else { -0.4 };
    }
    vec![
        check_op("mse_loss".into(), vec![("p", p.clone()), ("y", y)], PRIMITIVE_TOL, |t, v| {
            t.mse_loss(v[0], v[1])
        }),
        check_op("mae_sum_loss".into(), vec![("p", p), ("y", y2)], PRIMITIVE_TOL, |t, v| {
            t.mae_sum_loss(v[0], v[1])
        }),
    ]
}

pub fn randomize(store: &mut ParamStore, seed: u64) {
    let mut r = rng(seed);
    for p in store.iter_mut() {
        let shape = p.value.shape().to_vec();
        p.value = uniform(&mut r, &shape, -0.5, 0.5);
    }
}

fn gru() -> Vec<CaseResult> {
    let mut out = Vec::new();

    let mut store = ParamStore::new();
    let cell = GruCell::register(&mut store, &mut Init::new(1), "c", 3, 2, true).unwrap();
    randomize(&mut store, 10);
    let mut r = rng(11);
    let x = uniform(&mut r, &[1, 3], -1.0, 1.0);
    let h = uniform(&mut r, &[1, 2], -1.0, 1.0);
    let report = grad_check(&mut store, GradCheckOptions::default(), |tape, b| {
        let xv = tape.constant(x.clone());
        let hv = tape.constant(h.clone());
        let o = gru_cell_step(tape, b, &cell, xv, hv)?;
        project(tape, o)
    })
    .unwrap();
    out.push(CaseResult {
        name: "gru_cell_step".into(),
        max_rel_error: report.max_rel_error,
        tol: PRIMITIVE_TOL,
    });

    let mut store = ParamStore::new();
    let mut init = Init::new(2);
    let p = BiGru {
        forward: GruCell::register(&mut store, &mut init, "f", 4, 3, true).unwrap(),
        backward: GruCell::register(&mut store, &mut init, "b", 4, 3, true).unwrap(),
    };
    randomize(&mut store, 12);
    let x = uniform(&mut rng(13), &[5, 4], -1.0, 1.0);
    let report = grad_check(&mut store, GradCheckOptions::default(), |tape, b| {
        let xv = tape.constant(x.clone());
        let o = bi_gru(tape, b, &p, xv)?;
        project(tape, o)
    })
    .unwrap();
    out.push(CaseResult {
        name: "bi_gru T=5".into(),
        max_rel_error: report.max_rel_error,
        tol: MODEL_TOL,
    });
    out
}

pub fn tiny_config(learnable_alpha: bool) -> ModelConfig {
    ModelConfig {
        branches: Branches::Both,
        emb_sub: EmbSubModel::Both,
        bert_input_dim: 8,
        n_pairs: 2,
        emb_input_dim: 4,
        gru_hidden: 3,
        dense_width: 4,
        filters_per_kernel: 2,
        learnable_alpha,
        ..ModelConfig::default()
    }
}

fn model() -> Vec<CaseResult> {
    [false, true]
        .into_iter()
        .map(|learnable_alpha| {
            let mut model = IbenModel::new(tiny_config(learnable_alpha), 21).unwrap();
            randomize(model.params_mut(), 22);
            let mut r = rng(23);
            let input = ModelInput {
                fused: Some(uniform(&mut r, &[2, 8], -1.0, 1.0)),
                emb: Some(uniform(&mut r, &[5, 4], -1.0, 1.0)),
            };
            let structure = model.clone();
            let report = grad_check(model.params_mut(), GradCheckOptions::default(), |tape, b| {
                let pred = structure.forward_on_tape(tape, b, &input)?;
                let y = tape.constant(Tensor::scalar(1.3));
                tape.mse_loss(pred, y)
            })
            .unwrap();
            assert_eq!(report.params.len(), structure.params().len());
            CaseResult {
                name: format!("two-branch model H=3 D=4 pairs=2 learnable_alpha={learnable_alpha}"),
                max_rel_error: report.max_rel_error,
                tol: MODEL_TOL,
            }
        })
        .collect()
}
