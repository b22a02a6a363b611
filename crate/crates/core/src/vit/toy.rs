//! Seeded synthetic weights for small test models.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::block::{block_shape, BLOCK_TENSORS};
use super::ViTConfig;
use crate::error::Result;
use crate::formats::{Entry, WeightContainer};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ToyOptions {
    /// Zero the query and key projections so every attention row is uniform.
    pub uniform_attention: bool,
}

pub(crate) fn normal_vec(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f32> {
    if std == 0.0 {
        return vec![0.0; n];
    }
    let dist = Normal::new(0.0, std).expect("positive std");
    (0..n).map(|_| dist.sample(rng) as f32).collect()
}

/// Initial value for a block tensor: unit LayerNorm gains, `1/sqrt(fan_in)`
/// weights, small biases.
pub(crate) fn init_block_tensor(rng: &mut ChaCha8Rng, suffix: &str, shape: &[usize]) -> Vec<f32> {
    let n = shape.iter().product();
    if suffix.ends_with("gain") {
        vec![1.0; n]
    } else if suffix.starts_with("ln") {
        vec![0.0; n]
    } else if suffix.ends_with("weight") {
        normal_vec(rng, n, 1.0 / (shape[0] as f64).sqrt())
    } else {
        normal_vec(rng, n, 0.02)
    }
}

fn dims(shape: &[usize]) -> Vec<u32> {
    shape.iter().map(|&d| d as u32).collect()
}

/// Builds a complete container (including `meta.vit_config`) for `cfg`.
pub fn random_weights(cfg: &ViTConfig, seed: u64, opts: ToyOptions) -> Result<WeightContainer> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, p) = (cfg.dim, cfg.patch_size);
    let mut wc = WeightContainer::new();
    let put = |wc: &mut WeightContainer, name: String, shape: Vec<usize>, data: Vec<f32>| {
        wc.insert(Entry::new(name, dims(&shape), data).expect("consistent"))
    };
    let fan = 3 * p * p;
    put(&mut wc, "patch_embed.weight".into(), vec![fan, d], normal_vec(&mut rng, fan * d, 2.0 / (fan as f64).sqrt()))?;
    put(&mut wc, "patch_embed.bias".into(), vec![d], normal_vec(&mut rng, d, 0.02))?;
    if cfg.has_cls_token {
        put(&mut wc, "cls_token".into(), vec![d], normal_vec(&mut rng, d, 1.0))?;
    }
    let n = cfg.num_tokens();
    put(&mut wc, "pos_embed".into(), vec![n, d], normal_vec(&mut rng, n * d, 0.5))?;
    if cfg.pre_norm {
        put(&mut wc, "ln_pre.gain".into(), vec![d], vec![1.0; d])?;
        put(&mut wc, "ln_pre.bias".into(), vec![d], vec![0.0; d])?;
    }
    for i in 0..cfg.layers {
        for s in BLOCK_TENSORS {
            let shape = block_shape(s, d, cfg.hidden());
            let mut data = init_block_tensor(&mut rng, s, &shape);
            if opts.uniform_attention && (s.starts_with("attn.q") || s.starts_with("attn.k")) {
                data.iter_mut().for_each(|v| *v = 0.0);
            }
            put(&mut wc, format!("layer{i}.{s}"), shape, data)?;
        }
    }
    wc.insert(cfg.to_meta())?;
    Ok(wc)
}

/// Appends `extra` blocks whose attention and MLP output projections are
/// zero, so each added block passes its input through unchanged.
pub fn append_identity_blocks(
    wc: &WeightContainer,
    cfg: &ViTConfig,
    extra: usize,
    seed: u64,
) -> Result<(WeightContainer, ViTConfig)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = WeightContainer::new();
    for e in wc.entries().iter().filter(|e| e.name != super::config::META_CONFIG) {
        out.insert(e.clone())?;
    }
    let new_cfg = ViTConfig { layers: cfg.layers + extra, ..cfg.clone() };
    for i in cfg.layers..new_cfg.layers {
        for s in BLOCK_TENSORS {
            let shape = block_shape(s, cfg.dim, cfg.hidden());
            let mut data = init_block_tensor(&mut rng, s, &shape);
            if s.starts_with("attn.out") || s.starts_with("mlp.fc2") {
                data.iter_mut().for_each(|v| *v = 0.0);
            }
            out.insert(Entry::new(format!("layer{i}.{s}"), dims(&shape), data)?)?;
        }
    }
    out.insert(new_cfg.to_meta())?;
    Ok((out, new_cfg))
}
