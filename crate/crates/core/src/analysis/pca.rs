use serde::Serialize;

use crate::error::{contract, Result};
use crate::tensor::Tensor;

const POWER_ITERATIONS: usize = 200;

/// Principal component projection of token features.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k` unit eigenvectors of the covariance, each of length `dim`.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalue estimates, descending.
    pub eigenvalues: Vec<f64>,
    /// Share of total variance captured by each component.
    pub explained: Vec<f64>,
    /// `N x k` projections of the centred tokens.
    pub scores: Vec<Vec<f64>>,
}

impl Pca {
    /// `mean + scores . components`, row by row.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        self.scores
            .iter()
            .map(|s| {
                let mut row = self.mean.clone();
                for (c, w) in self.components.iter().zip(s) {
                    for (r, v) in row.iter_mut().zip(c) {
                        *r += w * v;
                    }
                }
                row
            })
            .collect()
    }
}

fn mat_vec(c: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| c[i * d..(i + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Top-`k` PCA by power iteration with deflation. Iteration starts from the
/// first canonical basis vector (moving to the next one if the start is
/// annihilated), runs a fixed number of steps, and the largest-magnitude
/// entry of each component is made positive.
pub fn pca_project(tokens: &Tensor, k: usize) -> Result<Pca> {
    let (n, d) = tokens.dims2()?;
    if k >= n {
        return Err(contract!("pca: k = {k} must be below the token count {n}"));
    }
    if k > d || k == 0 {
        return Err(contract!("pca: k = {k} must be in 1..={d}"));
    }
    let mean: Vec<f64> = (0..d).map(|j| (0..n).map(|i| tokens.at(i, j)).sum::<f64>() / n as f64).collect();
    let centred: Vec<Vec<f64>> = (0..n).map(|i| tokens.row(i).iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let mut cov = vec![0.0; d * d];
    for row in &centred {
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += row[a] * row[b];
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= n as f64);
    let total: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let scale = cov.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for _ in 0..k {
        let mut found = None;
        for start in 0..d {
            let mut v = vec![0.0; d];
            v[start] = 1.0;
            let mut alive = true;
            for _ in 0..POWER_ITERATIONS {
                let w = mat_vec(&cov, &v);
                let nw = norm(&w);
                if nw <= scale * 1e-14 || nw == 0.0 {
                    alive = false;
                    break;
                }
                v = w.into_iter().map(|x| x / nw).collect();
            }
            if alive {
                found = Some(v);
                break;
            }
        }
        // Remaining covariance is numerically zero: take any direction
        // orthogonal to the components found so far.
        let mut v = found.unwrap_or_else(|| orthogonal_fill(&components, d));
        let big = super::argmax(v.iter().map(|x| x.abs()));
        if v[big] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let cv = mat_vec(&cov, &v);
        let lambda: f64 = v.iter().zip(&cv).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] -= lambda * v[a] * v[b];
            }
        }
        components.push(v);
        eigenvalues.push(lambda);
    }
    let explained = eigenvalues.iter().map(|l| if total > 0.0 { l / total } else { 0.0 }).collect();
    let scores = centred
        .iter()
        .map(|row| components.iter().map(|c| row.iter().zip(c).map(|(a, b)| a * b).sum()).collect())
        .collect();
    Ok(Pca { mean, components, eigenvalues, explained, scores })
}

fn orthogonal_fill(existing: &[Vec<f64>], d: usize) -> Vec<f64> {
    for start in 0..d {
        let mut v = vec![0.0; d];
        v[start] = 1.0;
        for c in existing {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(x, y)| *x -= dot * y);
        }
        let nv = norm(&v);
        if nv > 1e-6 {
            return v.into_iter().map(|x| x / nv).collect();
        }
    }
    vec![0.0; d]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_on_a_line() {
        // along the y axis, so the e1 start is annihilated
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![2.0, i as f64 * 0.7 - 1.0]).collect();
        let p = pca_project(&Tensor::from_rows(&rows).unwrap(), 1).unwrap();
        assert!(p.explained[0] >= 1.0 - 1e-9);
        assert!((p.components[0][1] - 1.0).abs() < 1e-12);

        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 3.0 * i as f64 + 1.0]).collect();
        let p = pca_project(&Tensor::from_rows(&rows).unwrap(), 2).unwrap();
        assert!(p.explained[0] >= 1.0 - 1e-9);
        assert!(p.components[0].iter().all(|&c| c > 0.0));
    }

    #[test]
    fn k_must_be_below_n() {
        assert!(pca_project(&Tensor::zeros(&[3, 5]), 3).is_err());
    }

    #[test]
    fn deterministic() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| (0..4).map(|j| ((i * 7 + j * 3) % 11) as f64).collect()).collect();
        let t = Tensor::from_rows(&rows).unwrap();
        assert_eq!(pca_project(&t, 3).unwrap(), pca_project(&t, 3).unwrap());
    }
}
