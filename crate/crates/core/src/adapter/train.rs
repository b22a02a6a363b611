use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss_and_grads, AdapterWeights, LossConfig, LossInputs, LossReport};
use crate::codec::{decode, encode, Gamma, Preset};
use crate::error::{contract, Error, Result};
use crate::image::RgbImage;
use crate::tensor::{Adam, AdamConfig, Tensor};
use crate::vit::Model;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Leading fraction of steps that only record losses.
    pub warm_fraction: f64,
    pub seed: u64,
    pub loss: LossConfig,
    pub preset: Preset,
    pub gamma: Gamma,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 200,
            batch: 8,
            lr: 1e-3,
            warm_fraction: 0.25,
            seed: 0,
            loss: LossConfig::default(),
            preset: Preset::new(4).expect("valid preset"),
            gamma: Gamma::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub weights: AdapterWeights,
    /// Batch-mean losses, one per step, measured before that step's update.
    pub history: Vec<LossReport>,
}

/// CSV with header `step,l_low,l_high,l_total`.
pub fn history_csv(history: &[LossReport]) -> String {
    let mut s = String::from("step,l_low,l_high,l_total\n");
    for (i, r) in history.iter().enumerate() {
        s.push_str(&format!("{i},{},{},{}\n", r.l_low, r.l_high, r.l_total));
    }
    s
}

/// Trains a fresh adapter against a frozen model and codec.
///
/// Each image is coded once at `cfg.preset`. During the warm phase losses are
/// recorded but no update is made; afterwards Adam minimises `L_total` over
/// the adapter parameters. Batches are drawn from a seeded per-epoch shuffle.
pub fn train_adapter(images: &[RgbImage], model: &Model, cfg: &TrainConfig) -> Result<TrainOutput> {
    if images.is_empty() {
        return Err(contract!("training needs at least one image"));
    }
    if cfg.batch == 0 || cfg.steps == 0 || !(0.0..=1.0).contains(&cfg.warm_fraction) {
        return Err(contract!("invalid training schedule: {cfg:?}"));
    }
    cfg.loss.validate()?;
    let inputs = images
        .iter()
        .map(|img| {
            let bs = encode(img, cfg.preset, cfg.gamma, None)?.bitstream;
            let d = decode(&bs)?;
            LossInputs::new(img, &d.image, &d.latent, model)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut weights = AdapterWeights::init(model.config(), cfg.seed)?;
    let mut adam = Adam::new(AdamConfig { lr: cfg.lr, ..AdamConfig::default() })?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let warm = (cfg.steps as f64 * cfg.warm_fraction).round() as usize;
    let mut order: Vec<usize> = Vec::new();
    let mut history = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch);
        while batch.len() < cfg.batch {
            if order.is_empty() {
                order = (0..inputs.len()).collect();
                order.shuffle(&mut rng);
                order.reverse();
            }
            batch.push(order.pop().expect("refilled"));
        }
        let mut grads: Vec<Tensor> = weights.params().map(|p| Tensor::zeros(p.shape())).collect();
        let (mut l_low, mut l_high) = (0.0, 0.0);
        for &i in &batch {
            let (r, g) = loss_and_grads(&inputs[i], model, &weights, cfg.loss)?;
            if !r.l_total.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss at step {step}")));
            }
            l_low += r.l_low;
            l_high += r.l_high;
            for (acc, gi) in grads.iter_mut().zip(&g) {
                for (a, b) in acc.data_mut().iter_mut().zip(gi.data()) {
                    *a += b;
                }
            }
        }
        let n = batch.len() as f64;
        history.push(cfg.loss.report(l_low / n, l_high / n));
        if step >= warm {
            let grads: Vec<Tensor> = grads.into_iter().map(|t| t.map(|v| v / n)).collect();
            let grad_refs: Vec<&Tensor> = grads.iter().collect();
            adam.step(&mut weights.params_mut(), &grad_refs)?;
        }
    }
    Ok(TrainOutput { weights, history })
}
