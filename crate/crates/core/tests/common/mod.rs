#![allow(dead_code)]

use ctam_core::adapter::{AdapterWeights, LossInputs};
use ctam_core::codec::{decode, encode, Gamma, Preset};
use ctam_core::synth;
use ctam_core::vit::toy::{random_weights, ToyOptions};
use ctam_core::vit::{Model, ViTConfig};
use ctam_core::{RgbImage, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

/// `max_i |a_i - n_i| / max(max_i |a_i|, max_i |n_i|)`.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().chain(numeric).fold(0.0f64, |m, v| m.max(v.abs()));
    let err = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    if scale == 0.0 {
        0.0
    } else {
        err / scale
    }
}

/// Central differences of `f` at `x` for the given coordinates.
pub fn numeric_grad(x: &Tensor, coords: &[usize], mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
    coords
        .iter()
        .map(|&i| {
            let mut p = x.clone();
            p.data_mut()[i] += FD_STEP;
            let up = f(&p);
            p.data_mut()[i] -= 2.0 * FD_STEP;
            let down = f(&p);
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

pub fn toy_model(seed: u64) -> Model {
    let cfg = ViTConfig::toy();
    Model::load(&random_weights(&cfg, seed, ToyOptions::default()).unwrap(), &cfg).unwrap()
}

/// Adapter with every tensor randomised so no gradient is trivially zero.
pub fn random_adapter(cfg: &ViTConfig, seed: u64) -> AdapterWeights {
    let mut w = AdapterWeights::init(cfg, seed).unwrap();
    let mut r = rng(seed ^ 0x5eed);
    for p in w.params_mut() {
        for v in p.data_mut() {
            *v += r.random_range(-0.1..0.1);
        }
    }
    w
}

pub fn loss_inputs(model: &Model, seed: u64, preset: u8) -> LossInputs {
    let img = synth::image(synth::Pattern::Natural, 32, 32, seed);
    let d = decode(&encode(&img, Preset::new(preset).unwrap(), Gamma::default(), None).unwrap().bitstream).unwrap();
    LossInputs::new(&img, &d.image, &d.latent, model).unwrap()
}

pub fn random_image(seed: u64, w: usize, h: usize) -> RgbImage {
    let mut r = rng(seed);
    RgbImage::from_fn(w, h, |_, _| [r.random(), r.random(), r.random()])
}

pub mod codec;
pub mod gradients;
pub mod oracles;
