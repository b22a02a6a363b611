//! Finite-difference gradient checks shared by the gradient and acceptance tests.

use super::*;
use ctam_core::adapter::{loss_and_grads, loss_from_inputs, LossConfig};
use ctam_core::tensor::{Graph, Op, Tensor, Var};
use ctam_core::vit::{ViTConfig, BLOCK_TENSORS};
use rand::seq::index::sample;

pub const OP_TOL: f64 = 1e-6;
pub const E2E_TOL: f64 = 1e-5;

/// Builds `mean(op(inputs) * r)` for a fixed random `r` and returns the
/// worst relative gradient error over all inputs.
pub fn check_op(op: Op, inputs: &[Tensor], seed: u64) -> f64 {
    let out_shape = ctam_core::tensor::ops::apply(&op, &inputs.iter().collect::<Vec<_>>()).unwrap().shape().to_vec();
    let r = random_tensor(&mut rng(seed), &out_shape, 1.0);
    let eval = |xs: &[Tensor]| -> (f64, Graph, Vec<Var>, Var) {
        let mut g = Graph::new();
        let vars: Vec<Var> = xs.iter().map(|t| g.param(t.clone())).collect();
        let y = g.apply(op.clone(), &vars).unwrap();
        let rv = g.constant(r.clone());
        let prod = g.mul(y, rv).unwrap();
        let l = g.mean(prod).unwrap();
        (g.value(l).item().unwrap(), g, vars, l)
    };
    let (_, mut g, vars, l) = eval(inputs);
    g.backward(l).unwrap();
    let mut worst = 0.0f64;
    for (k, x) in inputs.iter().enumerate() {
        let analytic = g.grad(vars[k]).unwrap().data().to_vec();
        let coords: Vec<usize> = (0..x.numel()).collect();
        let numeric = numeric_grad(x, &coords, |p| {
            let mut xs = inputs.to_vec();
            xs[k] = p.clone();
            eval(&xs).0
        });
        worst = worst.max(max_rel_err(&analytic, &numeric));
    }
    worst
}

pub fn ops_cases() -> Vec<(&'static str, Op, Vec<Tensor>)> {
    let mut r = rng(11);
    let mut t = |shape: &[usize]| random_tensor(&mut r, shape, 1.5);
    vec![
        ("matmul", Op::MatMul, vec![t(&[3, 4]), t(&[4, 2])]),
        ("add", Op::Add, vec![t(&[3, 4]), t(&[3, 4])]),
        ("add_row_bias", Op::Add, vec![t(&[3, 4]), t(&[4])]),
        ("mul", Op::Mul, vec![t(&[2, 5]), t(&[2, 5])]),
        ("scale", Op::Scale(-0.7), vec![t(&[2, 3])]),
        ("transpose", Op::Transpose, vec![t(&[3, 5])]),
        ("softmax_rows", Op::SoftmaxRows, vec![t(&[3, 6])]),
        ("layernorm", Op::LayerNorm { eps: 1e-5 }, vec![t(&[3, 6]), t(&[6]), t(&[6])]),
        ("gelu", Op::Gelu, vec![t(&[4, 4])]),
        ("mse", Op::Mse, vec![t(&[3, 3]), t(&[3, 3])]),
        ("concat0", Op::Concat { axis: 0 }, vec![t(&[2, 3]), t(&[1, 3])]),
        ("concat1", Op::Concat { axis: 1 }, vec![t(&[2, 3]), t(&[2, 2])]),
        ("slice0", Op::Slice { axis: 0, start: 1, end: 3 }, vec![t(&[4, 3])]),
        ("slice1", Op::Slice { axis: 1, start: 0, end: 2 }, vec![t(&[2, 5])]),
        ("mean", Op::Mean, vec![t(&[3, 4])]),
    ]
}

/// Worst relative error of `mse(W x, y)` with respect to `W`.
pub fn linear_mse_error() -> f64 {
    let mut r = rng(5);
    let w = random_tensor(&mut r, &[4, 3], 1.0);
    let x = random_tensor(&mut r, &[3, 2], 1.0);
    let y = random_tensor(&mut r, &[4, 2], 1.0);
    let loss = |w: &Tensor| {
        let mut g = Graph::new();
        let (wv, xv, yv) = (g.param(w.clone()), g.constant(x.clone()), g.constant(y.clone()));
        let p = g.matmul(wv, xv).unwrap();
        let l = g.mse(p, yv).unwrap();
        (g, wv, l)
    };
    let (mut g, wv, l) = loss(&w);
    g.backward(l).unwrap();
    let analytic = g.grad(wv).unwrap().data().to_vec();
    let numeric = numeric_grad(&w, &(0..12).collect::<Vec<_>>(), |p| {
        let (g, _, l) = loss(p);
        g.value(l).item().unwrap()
    });
    max_rel_err(&analytic, &numeric)
}

/// Per adapter tensor: name and worst error of the full loss gradient on 24
/// sampled coordinates. The attention key bias has an exactly zero gradient
/// (a per-row score shift that softmax removes), so its error is absolute.
pub fn adapter_errors() -> Vec<(String, f64)> {
    let cfg = ViTConfig::toy();
    let model = toy_model(2);
    let inputs = loss_inputs(&model, 9, 2);
    let weights = random_adapter(&cfg, 3);
    let lc = LossConfig::default();
    let (_, grads) = loss_and_grads(&inputs, &model, &weights, lc).unwrap();
    let mut r = rng(77);
    let names = std::iter::once("proj".to_string()).chain(BLOCK_TENSORS.iter().map(|s| s.to_string()));
    let mut out = Vec::new();
    for (k, ((p, g), name)) in weights.params().zip(&grads).zip(names).enumerate() {
        let coords: Vec<usize> = sample(&mut r, p.numel(), p.numel().min(24)).into_vec();
        let numeric = numeric_grad(p, &coords, |pp| {
            let mut w = weights.clone();
            *w.params_mut()[k] = pp.clone();
            loss_from_inputs(&inputs, &model, Some(&w), lc).unwrap().l_total
        });
        let analytic: Vec<f64> = coords.iter().map(|&i| g.data()[i]).collect();
        let err = if name == "attn.k.bias" {
            analytic.iter().chain(&numeric).fold(0.0f64, |m, v| m.max(v.abs()))
        } else {
            max_rel_err(&analytic, &numeric)
        };
        out.push((name, err));
    }
    out
}
