use serde::Serialize;

use super::argmax;
use crate::error::{contract, Result};
use crate::tensor::Tensor;
use crate::vit::ViTTrace;

/// Patch layout; token `i` sits at `(i / cols, i % cols)` in patch units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
}

impl PatchGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        PatchGrid { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coord(&self, i: usize) -> (f64, f64) {
        ((i / self.cols) as f64, (i % self.cols) as f64)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coord(i), self.coord(j));
        (a.0 - b.0).hypot(a.1 - b.1)
    }

    pub fn diagonal(&self) -> f64 {
        ((self.rows.max(1) - 1) as f64).hypot((self.cols.max(1) - 1) as f64)
    }
}

/// Per-layer attention distances in patch units.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DistanceReport {
    pub d_avg: Vec<f64>,
    pub d_top1: Vec<f64>,
}

impl DistanceReport {
    /// `layer,d_avg,d_top1` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,d_avg,d_top1\n");
        for (i, (a, t)) in self.d_avg.iter().zip(&self.d_top1).enumerate() {
            s.push_str(&format!("{i},{a},{t}\n"));
        }
        s
    }
}

/// Drops the CLS row and column (token 0) and renormalises each remaining
/// row to sum to one. A row with no mass left becomes uniform.
pub fn patch_submatrix(attention: &Tensor) -> Result<Tensor> {
    let (n, m) = attention.dims2()?;
    if n != m || n < 2 {
        return Err(contract!("need a square attention matrix with CLS, got {n}x{m}"));
    }
    let p = n - 1;
    let mut out = Vec::with_capacity(p * p);
    for r in 1..n {
        let row = &attention.row(r)[1..];
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            out.extend(row.iter().map(|v| v / sum));
        } else {
            out.extend(std::iter::repeat_n(1.0 / p as f64, p));
        }
    }
    Tensor::new(vec![p, p], out)
}

/// `(D_avg, D_top1)` for a patch-only attention matrix:
/// `D_avg = 1/N sum_i sum_j A_ij d(i, j)` and
/// `D_top1 = 1/N sum_i d(i, argmax_j A_ij)`.
pub fn attention_distances(attention: &Tensor, grid: PatchGrid) -> Result<(f64, f64)> {
    let (n, m) = attention.dims2()?;
    if n != m || n != grid.len() || n == 0 {
        return Err(contract!("attention {n}x{m} does not match a {}x{} patch grid", grid.rows, grid.cols));
    }
    let mut d_avg = 0.0;
    let mut d_top1 = 0.0;
    for i in 0..n {
        let row = attention.row(i);
        let mut acc = 0.0;
        for (j, &a) in row.iter().enumerate() {
            acc += a * grid.distance(i, j);
        }
        d_avg += acc;
        d_top1 += grid.distance(i, argmax(row.iter().copied()));
    }
    Ok((d_avg / n as f64, d_top1 / n as f64))
}

/// Distances for every captured layer of a trace, CLS removed when present.
pub fn layer_distances(trace: &ViTTrace) -> Result<DistanceReport> {
    let grid = PatchGrid::new(trace.grid, trace.grid);
    let mut report = DistanceReport { d_avg: Vec::new(), d_top1: Vec::new() };
    for (i, layer) in trace.layers.iter().enumerate() {
        let a = layer.attention.as_ref().ok_or_else(|| contract!("layer {i} has no captured attention"))?;
        let patches = if trace.has_cls { patch_submatrix(a)? } else { a.clone() };
        let (avg, top1) = attention_distances(&patches, grid)?;
        report.d_avg.push(avg);
        report.d_top1.push(top1);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_zero_distance() {
        for (r, c) in [(1, 1), (2, 3), (4, 4)] {
            let g = PatchGrid::new(r, c);
            let (a, t) = attention_distances(&Tensor::eye(g.len()), g).unwrap();
            assert_eq!((a, t), (0.0, 0.0));
        }
    }

    #[test]
    fn uniform_on_two_by_two() {
        // each token sees distances {0, 1, 1, sqrt 2}
        let expected = (2.0 + 2f64.sqrt()) / 4.0;
        let g = PatchGrid::new(2, 2);
        let (a, t) = attention_distances(&Tensor::full(&[4, 4], 0.25), g).unwrap();
        assert!((a - expected).abs() < 1e-12);
        assert!((a - 0.853553).abs() < 1e-6);
        // argmax ties resolve to token 0
        assert!((t - expected).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch() {
        assert!(attention_distances(&Tensor::eye(5), PatchGrid::new(2, 2)).is_err());
    }

    #[test]
    fn submatrix_renormalises() {
        let a = Tensor::from_rows(&[
            vec![0.5, 0.25, 0.25],
            vec![0.5, 0.1, 0.4],
            vec![1.0, 0.0, 0.0],
        ])
        .unwrap();
        let p = patch_submatrix(&a).unwrap();
        assert!((p.at(0, 0) - 0.2).abs() < 1e-15 && (p.at(0, 1) - 0.8).abs() < 1e-15);
        assert_eq!(p.row(1), &[0.5, 0.5]);
    }
}
