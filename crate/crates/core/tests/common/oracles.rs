//! Independent loop-based oracles.

use ctam_core::Tensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Straight loops: mean, population variance, then thresholds.
pub fn oracle_levels(values: &[f64], k: f64, five: bool) -> Vec<i8> {
    let mut sum = 0.0;
    for v in values {
        sum += v;
    }
    let mu = sum / values.len() as f64;
    let mut sq = 0.0;
    for v in values {
        sq += (v - mu) * (v - mu);
    }
    let mut sigma = (sq / values.len() as f64).sqrt();
    if sigma <= 1e-12 * mu.abs() {
        sigma = 0.0;
    }
    let mut out = Vec::new();
    for &v in values {
        let mut l = 0;
        if sigma > 0.0 {
            if v > mu + k * sigma {
                l = 1;
            }
            if v < mu - k * sigma {
                l = -1;
            }
            if five && v > mu + 2.0 * k * sigma {
                l = 2;
            }
            if five && v < mu - 2.0 * k * sigma {
                l = -2;
            }
        }
        out.push(l);
    }
    out
}

/// Plain double loop with coordinates computed from scratch.
pub fn brute_force(a: &Tensor, rows: usize, cols: usize) -> (f64, f64) {
    let n = rows * cols;
    let coord = |i: usize| ((i / cols) as f64, (i % cols) as f64);
    let dist = |i: usize, j: usize| {
        let ((y1, x1), (y2, x2)) = (coord(i), coord(j));
        ((y1 - y2).powi(2) + (x1 - x2).powi(2)).sqrt()
    };
    let (mut avg, mut top) = (0.0, 0.0);
    for i in 0..n {
        let mut best = 0;
        for j in 0..n {
            avg += a.at(i, j) * dist(i, j);
            if a.at(i, j) > a.at(i, best) {
                best = j;
            }
        }
        top += dist(i, best);
    }
    (avg / n as f64, top / n as f64)
}

/// Random row-stochastic `n x n` matrix with strictly positive entries.
pub fn stochastic_matrix(r: &mut ChaCha8Rng, n: usize) -> Tensor {
    let mut v: Vec<f64> = (0..n * n).map(|_| r.random_range(0.001..1.0)).collect();
    for row in v.chunks_mut(n) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    Tensor::new(vec![n, n], v).unwrap()
}
