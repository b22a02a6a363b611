//! Forward kernels and vector-Jacobian products for the supported op table.
//!
//! | op            | inputs                         | output            |
//! |---------------|--------------------------------|-------------------|
//! | `MatMul`      | `[m,k]`, `[k,n]`               | `[m,n]`           |
//! | `Add`         | `x`, same shape or `[last(x)]` | shape of `x`      |
//! | `Mul`         | two equal shapes               | same              |
//! | `Scale(s)`    | any                            | same              |
//! | `Transpose`   | `[m,n]`                        | `[n,m]`           |
//! | `SoftmaxRows` | any rank >= 1, over last axis  | same              |
//! | `LayerNorm`   | `x [.., d]`, gain `[d]`, bias `[d]` | shape of `x` |
//! | `Gelu`        | any                            | same              |
//! | `Mse`         | two equal shapes               | scalar            |
//! | `Concat`      | rank-2 tensors, along axis 0/1 | rank-2            |
//! | `Slice`       | `[m,n]`, range along axis 0/1  | rank-2            |
//! | `Mean`        | any                            | scalar            |
//!
//! The row-vector form of `Add` is the only broadcast; it carries linear
//! layer biases.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::Tensor;
use crate::error::{contract, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    MatMul,
    Add,
    Mul,
    Scale(f64),
    Transpose,
    SoftmaxRows,
    LayerNorm { eps: f64 },
    Gelu,
    Mse,
    Concat { axis: usize },
    Slice { axis: usize, start: usize, end: usize },
    Mean,
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::MatMul => "matmul",
            Op::Add => "add",
            Op::Mul => "mul",
            Op::Scale(_) => "scale",
            Op::Transpose => "transpose",
            Op::SoftmaxRows => "softmax_rows",
            Op::LayerNorm { .. } => "layernorm",
            Op::Gelu => "gelu",
            Op::Mse => "mse",
            Op::Concat { .. } => "concat",
            Op::Slice { .. } => "slice",
            Op::Mean => "mean",
        }
    }

    fn arity(&self) -> Option<usize> {
        match self {
            Op::MatMul | Op::Add | Op::Mul | Op::Mse => Some(2),
            Op::LayerNorm { .. } => Some(3),
            Op::Concat { .. } => None,
            _ => Some(1),
        }
    }
}

fn shapes(inputs: &[&Tensor]) -> Vec<Vec<usize>> {
    inputs.iter().map(|t| t.shape().to_vec()).collect()
}

/// Evaluates `op` on `inputs`. Non-finite results are reported as errors.
pub fn apply(op: &Op, inputs: &[&Tensor]) -> Result<Tensor> {
    if let Some(n) = op.arity() {
        if inputs.len() != n {
            return Err(contract!("{} takes {} inputs, got {}", op.name(), n, inputs.len()));
        }
    } else if inputs.is_empty() {
        return Err(contract!("{} needs at least one input", op.name()));
    }
    let mismatch = || contract!("{}: incompatible shapes {:?}", op.name(), shapes(inputs));
    let out = match op {
        Op::MatMul => {
            let (m, k) = inputs[0].dims2().map_err(|_| mismatch())?;
            let (k2, n) = inputs[1].dims2().map_err(|_| mismatch())?;
            if k != k2 {
                return Err(mismatch());
            }
            Tensor::new(vec![m, n], matmul_raw(inputs[0].data(), inputs[1].data(), m, k, n))?
        }
        Op::Add => {
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape() == b.shape() {
                zip(a, b, |x, y| x + y)
            } else if b.rank() == 1 && a.rank() >= 1 && a.shape().last() == b.shape().first() {
                let d = b.numel();
                let data = a.data().iter().enumerate().map(|(i, &x)| x + b.data()[i % d]).collect();
                Tensor::new(a.shape().to_vec(), data)?
            } else {
                return Err(mismatch());
            }
        }
        Op::Mul => {
            if inputs[0].shape() != inputs[1].shape() {
                return Err(mismatch());
            }
            zip(inputs[0], inputs[1], |x, y| x * y)
        }
        Op::Scale(s) => inputs[0].map(|x| x * s),
        Op::Transpose => {
            let (m, n) = inputs[0].dims2().map_err(|_| mismatch())?;
            Tensor::new(vec![n, m], transpose_raw(inputs[0].data(), m, n))?
        }
        Op::SoftmaxRows => {
            let x = inputs[0];
            let d = *x.shape().last().ok_or_else(mismatch)?;
            if d == 0 {
                return Err(mismatch());
            }
            let mut out = x.data().to_vec();
            for row in out.chunks_mut(d) {
                softmax_in_place(row);
            }
            Tensor::new(x.shape().to_vec(), out)?
        }
        Op::LayerNorm { eps } => {
            let (x, gain, bias) = (inputs[0], inputs[1], inputs[2]);
            let d = *x.shape().last().ok_or_else(mismatch)?;
            if d == 0 || gain.shape() != [d] || bias.shape() != [d] {
                return Err(mismatch());
            }
            let mut out = Vec::with_capacity(x.numel());
            for row in x.data().chunks(d) {
                let (mean, rstd) = row_stats(row, *eps);
                for j in 0..d {
                    out.push((row[j] - mean) * rstd * gain.data()[j] + bias.data()[j]);
                }
            }
            Tensor::new(x.shape().to_vec(), out)?
        }
        Op::Gelu => inputs[0].map(gelu),
        Op::Mse => {
            let (a, b) = (inputs[0], inputs[1]);
            if a.shape() != b.shape() || a.numel() == 0 {
                return Err(mismatch());
            }
            let sum: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
            Tensor::scalar(sum / a.numel() as f64)
        }
        Op::Concat { axis } => concat(inputs, *axis).ok_or_else(mismatch)?,
        Op::Slice { axis, start, end } => {
            let (m, n) = inputs[0].dims2().map_err(|_| mismatch())?;
            let extent = if *axis == 0 { m } else { n };
            if *axis > 1 || start > end || *end > extent {
                return Err(mismatch());
            }
            let x = inputs[0].data();
            if *axis == 0 {
                Tensor::new(vec![end - start, n], x[start * n..end * n].to_vec())?
            } else {
                let w = end - start;
                let mut out = Vec::with_capacity(m * w);
                for r in 0..m {
                    out.extend_from_slice(&x[r * n + start..r * n + end]);
                }
                Tensor::new(vec![m, w], out)?
            }
        }
        Op::Mean => {
            let x = inputs[0];
            if x.numel() == 0 {
                return Err(mismatch());
            }
            Tensor::scalar(x.data().iter().sum::<f64>() / x.numel() as f64)
        }
    };
    out.ensure_finite(op.name())?;
    Ok(out)
}

/// Gradients of every input given the upstream gradient of the output.
pub fn vjp(op: &Op, inputs: &[&Tensor], output: &Tensor, grad: &Tensor) -> Result<Vec<Tensor>> {
    let g = grad.data();
    Ok(match op {
        Op::MatMul => {
            let (m, k) = inputs[0].dims2()?;
            let n = inputs[1].shape()[1];
            let bt = transpose_raw(inputs[1].data(), k, n);
            let at = transpose_raw(inputs[0].data(), m, k);
            vec![
                Tensor::new(vec![m, k], matmul_raw(g, &bt, m, n, k))?,
                Tensor::new(vec![k, n], matmul_raw(&at, g, k, m, n))?,
            ]
        }
        Op::Add => {
            let (a, b) = (inputs[0], inputs[1]);
            let gb = if a.shape() == b.shape() {
                grad.clone()
            } else {
                let d = b.numel();
                let mut acc = vec![0.0; d];
                for (i, &v) in g.iter().enumerate() {
                    acc[i % d] += v;
                }
                Tensor::new(vec![d], acc)?
            };
            vec![grad.clone(), gb]
        }
        Op::Mul => vec![zip(grad, inputs[1], |g, y| g * y), zip(grad, inputs[0], |g, x| g * x)],
        Op::Scale(s) => vec![grad.map(|v| v * s)],
        Op::Transpose => {
            let (m, n) = inputs[0].dims2()?;
            vec![Tensor::new(vec![m, n], transpose_raw(g, n, m))?]
        }
        Op::SoftmaxRows => {
            let d = *output.shape().last().unwrap_or(&1);
            let mut out = vec![0.0; output.numel()];
            for ((o, y), gr) in out.chunks_mut(d).zip(output.data().chunks(d)).zip(g.chunks(d)) {
                let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                for j in 0..d {
                    o[j] = y[j] * (gr[j] - dot);
                }
            }
            vec![Tensor::new(output.shape().to_vec(), out)?]
        }
        Op::LayerNorm { eps } => {
            let (x, gain) = (inputs[0], inputs[1]);
            let d = gain.numel();
            let mut dx = vec![0.0; x.numel()];
            let mut dgain = vec![0.0; d];
            let mut dbias = vec![0.0; d];
            let mut xhat = vec![0.0; d];
            let mut dxhat = vec![0.0; d];
            for (r, row) in x.data().chunks(d).enumerate() {
                let (mean, rstd) = row_stats(row, *eps);
                let gr = &g[r * d..(r + 1) * d];
                for j in 0..d {
                    xhat[j] = (row[j] - mean) * rstd;
                    dgain[j] += gr[j] * xhat[j];
                    dbias[j] += gr[j];
                    dxhat[j] = gr[j] * gain.data()[j];
                }
                let mean_dxhat = dxhat.iter().sum::<f64>() / d as f64;
                let mean_dxhat_xhat =
                    dxhat.iter().zip(&xhat).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                for j in 0..d {
                    dx[r * d + j] = rstd * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                }
            }
            vec![
                Tensor::new(x.shape().to_vec(), dx)?,
                Tensor::new(vec![d], dgain)?,
                Tensor::new(vec![d], dbias)?,
            ]
        }
        Op::Gelu => vec![zip(grad, inputs[0], |g, x| g * gelu_grad(x))],
        Op::Mse => {
            let (a, b) = (inputs[0], inputs[1]);
            let c = 2.0 * g[0] / a.numel() as f64;
            let da = zip(a, b, |x, y| c * (x - y));
            let db = da.map(|v| -v);
            vec![da, db]
        }
        Op::Concat { axis } => {
            let mut grads = Vec::with_capacity(inputs.len());
            let (rows, cols) = grad.dims2()?;
            let mut offset = 0;
            for t in inputs {
                let (m, n) = t.dims2()?;
                let (a, b) = if *axis == 0 { (offset, offset + m) } else { (offset, offset + n) };
                let part = apply(&Op::Slice { axis: *axis, start: a, end: b }, &[grad])?;
                offset = b;
                grads.push(part);
            }
            debug_assert_eq!(offset, if *axis == 0 { rows } else { cols });
            grads
        }
        Op::Slice { axis, start, end } => {
            let (m, n) = inputs[0].dims2()?;
            let mut out = vec![0.0; m * n];
            if *axis == 0 {
                out[start * n..end * n].copy_from_slice(g);
            } else {
                let w = end - start;
                for r in 0..m {
                    out[r * n + start..r * n + end].copy_from_slice(&g[r * w..(r + 1) * w]);
                }
            }
            vec![Tensor::new(vec![m, n], out)?]
        }
        Op::Mean => {
            let x = inputs[0];
            vec![Tensor::full(x.shape(), g[0] / x.numel() as f64)]
        }
    })
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor { shape: a.shape().to_vec(), data }
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                orow[j] += av * brow[j];
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], m: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}

fn concat(inputs: &[&Tensor], axis: usize) -> Option<Tensor> {
    let dims: Vec<(usize, usize)> = inputs.iter().map(|t| t.dims2().ok()).collect::<Option<_>>()?;
    match axis {
        0 => {
            let n = dims[0].1;
            if dims.iter().any(|d| d.1 != n) {
                return None;
            }
            let m = dims.iter().map(|d| d.0).sum();
            let data = inputs.iter().flat_map(|t| t.data().iter().copied()).collect();
            Tensor::new(vec![m, n], data).ok()
        }
        1 => {
            let m = dims[0].0;
            if dims.iter().any(|d| d.0 != m) {
                return None;
            }
            let n: usize = dims.iter().map(|d| d.1).sum();
            let mut data = Vec::with_capacity(m * n);
            for r in 0..m {
                for t in inputs {
                    data.extend_from_slice(t.row(r));
                }
            }
            Tensor::new(vec![m, n], data).ok()
        }
        _ => None,
    }
}

/// Population mean and `1/sqrt(var + eps)` of one row.
fn row_stats(row: &[f64], eps: f64) -> (f64, f64) {
    let d = row.len() as f64;
    let mean = row.iter().sum::<f64>() / d;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
    (mean, 1.0 / (var + eps).sqrt())
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Exact GELU, `x * Phi(x)`.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::erf(x * FRAC_1_SQRT_2))
}

pub fn gelu_grad(x: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(x * FRAC_1_SQRT_2));
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    cdf + x * pdf
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_by_hand() {
        let a = t(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = t(&[&[5.0, 6.0], &[7.0, 8.0]]);
        let c = apply(&Op::MatMul, &[&a, &b]).unwrap();
        assert_eq!(c, t(&[&[19.0, 22.0], &[43.0, 50.0]]));
        let i = Tensor::eye(2);
        assert_eq!(apply(&Op::MatMul, &[&i, &b]).unwrap(), b);
    }

    #[test]
    fn matmul_shape_mismatch_names_op() {
        let a = Tensor::zeros(&[2, 3]);
        let err = apply(&Op::MatMul, &[&a, &a]).unwrap_err().to_string();
        assert!(err.contains("matmul") && err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn softmax_constant_row_is_uniform() {
        for c in [-1e3, 0.0, 7.5, 1e3] {
            let y = apply(&Op::SoftmaxRows, &[&t(&[&[c, c, c]])]).unwrap();
            for v in y.data() {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn non_finite_output_is_numeric_error() {
        let a = t(&[&[f64::MAX, 1.0]]);
        let err = apply(&Op::Add, &[&a, &a]).unwrap_err();
        assert_eq!(err.code(), "numeric");
    }

    #[test]
    fn row_bias_broadcast() {
        let x = t(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = Tensor::new(vec![2], vec![10.0, 20.0]).unwrap();
        let y = apply(&Op::Add, &[&x, &b]).unwrap();
        assert_eq!(y, t(&[&[11.0, 22.0], &[13.0, 24.0]]));
        let bad = Tensor::new(vec![3], vec![0.0; 3]).unwrap();
        assert!(apply(&Op::Add, &[&x, &bad]).is_err());
    }

    #[test]
    fn concat_and_slice_are_inverse() {
        let a = t(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = t(&[&[5.0], &[6.0]]);
        let c = apply(&Op::Concat { axis: 1 }, &[&a, &b]).unwrap();
        assert_eq!(c, t(&[&[1.0, 2.0, 5.0], &[3.0, 4.0, 6.0]]));
        let back = apply(&Op::Slice { axis: 1, start: 0, end: 2 }, &[&c]).unwrap();
        assert_eq!(back, a);
        let rows = apply(&Op::Concat { axis: 0 }, &[&a, &a]).unwrap();
        assert_eq!(rows.shape(), &[4, 2]);
        assert!(apply(&Op::Slice { axis: 0, start: 1, end: 5 }, &[&a]).is_err());
    }

    #[test]
    fn gelu_reference_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu_grad(0.0) - 0.5).abs() < 1e-15);
        // Phi(1) = 0.841344746068543
        assert!((gelu(1.0) - 0.841344746068543).abs() < 1e-12);
    }
}
