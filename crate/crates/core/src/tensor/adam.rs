use super::Tensor;
use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment buffers are created lazily as zeros on
/// the first step and must keep the same shapes afterwards.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(contract!("adam: learning rate must be positive, got {}", config.lr));
        }
        Ok(Adam { config, t: 0, m: Vec::new(), v: Vec::new() })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(contract!("adam: {} params but {} grads", params.len(), grads.len()));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(contract!("adam: param {:?} vs grad {:?}", p.shape(), g.shape()));
            }
        }
        if self.t == 0 {
            self.m = params.iter().map(|p| vec![0.0; p.numel()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len()
            || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.numel())
        {
            return Err(contract!("adam: parameter layout changed between steps"));
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grad_leaves_params() {
        let mut opt = Adam::new(AdamConfig::default()).unwrap();
        let mut p = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let g = Tensor::zeros(&[3]);
        for _ in 0..5 {
            opt.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert_eq!(p.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = Adam::new(AdamConfig { lr: 0.1, ..AdamConfig::default() }).unwrap();
        let mut p = Tensor::scalar(0.0);
        opt.step(&mut [&mut p], &[&Tensor::scalar(1.0)]).unwrap();
        // m_hat / sqrt(v_hat) = 1, so the step is -lr / (1 + eps)
        assert!((p.item().unwrap() + 0.1).abs() < 1e-8);
    }

    #[test]
    fn rejects_non_positive_lr() {
        for lr in [0.0, -1e-3, f64::NAN] {
            let err = Adam::new(AdamConfig { lr, ..AdamConfig::default() }).unwrap_err();
            assert_eq!(err.code(), "contract");
        }
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut opt = Adam::new(AdamConfig::default()).unwrap();
            let mut p = Tensor::new(vec![2], vec![0.3, -0.7]).unwrap();
            for k in 0..50 {
                let g = p.map(|x| 2.0 * x + (k as f64).sin());
                opt.step(&mut [&mut p], &[&g]).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert_eq!(
            a.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }
}
