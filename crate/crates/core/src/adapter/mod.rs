//! Decoder-side latent adapter.
//!
//! Decoded DCT coefficients are gathered into one token per ViT patch,
//! projected to the model width, passed through one transformer block and
//! added to the patch embeddings of the decoded image.

mod train;

pub use train::{history_csv, train_adapter, TrainConfig, TrainOutput};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{dct::ZIGZAG, Latent};
use crate::error::{contract, Error, Result};
use crate::formats::{Entry, WeightContainer};
use crate::image::RgbImage;
use crate::tensor::{Graph, Tensor, Var};
use crate::vit::toy::init_block_tensor;
use crate::vit::{block_forward, block_shape, Capture, Model, ViTConfig, BLOCK_TENSORS};

pub const PROJ_NAME: &str = "adapter.proj";
pub const BLOCK_PREFIX: &str = "adapter.block.";
/// Fixed factor applied to latent tokens before the projection, putting
/// 8-bit-range coefficients on the ViT's `[0, 1]` pixel scale.
pub const LATENT_SCALE: f64 = 1.0 / 255.0;

/// Width of one latent token for `cfg`: `(patch / 8)^2 * 3 * 64`.
pub fn latent_dim(cfg: &ViTConfig) -> Result<usize> {
    let p = cfg.patch_size;
    if p < 8 || !p.is_multiple_of(8) {
        return Err(contract!("patch size {p} must be a positive multiple of the 8-pixel block"));
    }
    Ok((p / 8) * (p / 8) * 192)
}

/// One row per ViT patch (raster order) holding the coefficients of the
/// blocks inside it: blocks in raster order, then channel, then zigzag.
pub fn latent_tokens(latent: &Latent, cfg: &ViTConfig) -> Result<Tensor> {
    let dim = latent_dim(cfg)?;
    let s = cfg.image_size;
    if latent.width != s || latent.height != s {
        return Err(contract!("latent covers {}x{} pixels, model expects {s}x{s}", latent.width, latent.height));
    }
    let (grid, bpp) = (cfg.grid(), cfg.patch_size / 8);
    let mut data = Vec::with_capacity(grid * grid * dim);
    for py in 0..grid {
        for px in 0..grid {
            for by in py * bpp..(py + 1) * bpp {
                for bx in px * bpp..(px + 1) * bpp {
                    for ch in 0..3 {
                        let block = latent.block(bx, by, ch);
                        data.extend(ZIGZAG.iter().map(|&i| block[i]));
                    }
                }
            }
        }
    }
    Tensor::new(vec![grid * grid, dim], data)
}

/// Latent projection (no bias) plus one block in the ViT block layout.
#[derive(Clone, Debug, PartialEq)]
pub struct AdapterWeights {
    pub proj: Tensor,
    /// Tensors in `BLOCK_TENSORS` order.
    pub block: Vec<Tensor>,
    pub heads: usize,
    pub eps: f64,
}

impl AdapterWeights {
    /// Seeded block weights with zero projection and zero block output
    /// projections, so the adapter's output starts at exactly zero.
    pub fn init(cfg: &ViTConfig, seed: u64) -> Result<Self> {
        let (ld, d, h) = (latent_dim(cfg)?, cfg.dim, cfg.hidden());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let block = BLOCK_TENSORS
            .iter()
            .map(|s| {
                let shape = block_shape(s, d, h);
                let mut v = init_block_tensor(&mut rng, s, &shape);
                if s.starts_with("attn.out") || s.starts_with("mlp.fc2") {
                    v.iter_mut().for_each(|x| *x = 0.0);
                }
                Tensor::new(shape, v.into_iter().map(f64::from).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AdapterWeights { proj: Tensor::zeros(&[ld, d]), block, heads: cfg.heads, eps: cfg.layer_norm_eps })
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        std::iter::once(&self.proj).chain(self.block.iter())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        std::iter::once(&mut self.proj).chain(self.block.iter_mut()).collect()
    }

    pub fn to_container(&self) -> Result<WeightContainer> {
        let mut wc = WeightContainer::new();
        wc.insert(Entry::from_tensor(PROJ_NAME, &self.proj)?)?;
        for (s, t) in BLOCK_TENSORS.iter().zip(&self.block) {
            wc.insert(Entry::from_tensor(format!("{BLOCK_PREFIX}{s}"), t)?)?;
        }
        Ok(wc)
    }

    pub fn from_container(wc: &WeightContainer, cfg: &ViTConfig) -> Result<Self> {
        let (ld, d, h) = (latent_dim(cfg)?, cfg.dim, cfg.hidden());
        let load = |name: String, shape: Vec<usize>| -> Result<Tensor> {
            let e = wc.get(&name).ok_or_else(|| Error::Load { tensor: name.clone(), msg: "missing".into() })?;
            if e.shape() != shape {
                return Err(Error::Load { tensor: name, msg: format!("expected shape {shape:?}, got {:?}", e.shape()) });
            }
            Ok(e.to_tensor())
        };
        let proj = load(PROJ_NAME.into(), vec![ld, d])?;
        let block = BLOCK_TENSORS
            .iter()
            .map(|s| load(format!("{BLOCK_PREFIX}{s}"), block_shape(s, d, h)))
            .collect::<Result<Vec<_>>>()?;
        Ok(AdapterWeights { proj, block, heads: cfg.heads, eps: cfg.layer_norm_eps })
    }
}

/// Graph nodes for adapter parameters.
struct AdapterVars {
    pub proj: Var,
    pub block: Vec<Var>,
}

impl AdapterVars {
    pub fn new(g: &mut Graph, w: &AdapterWeights, trainable: bool) -> Self {
        AdapterVars {
            proj: g.leaf(w.proj.clone(), trainable),
            block: w.block.iter().map(|t| g.leaf(t.clone(), trainable)).collect(),
        }
    }

    pub fn all(&self) -> Vec<Var> {
        std::iter::once(self.proj).chain(self.block.iter().copied()).collect()
    }
}

/// `patch_embeddings + Block(LATENT_SCALE * latent_toks @ proj)` on the graph.
fn adapt_graph(g: &mut Graph, latent_toks: Var, pe: Var, w: &AdapterWeights, vars: &AdapterVars) -> Result<Var> {
    let (n, ld) = g.value(latent_toks).dims2()?;
    let (np, d) = g.value(pe).dims2()?;
    let (pl, pd) = w.proj.dims2()?;
    if n != np || ld != pl || d != pd {
        return Err(contract!(
            "adapter mismatch: latent tokens {n}x{ld}, patch embeddings {np}x{d}, projection {pl}x{pd}"
        ));
    }
    let lt = g.scale(latent_toks, LATENT_SCALE)?;
    let x = g.matmul(lt, vars.proj)?;
    let (y, _) = block_forward(g, x, &vars.block, w.heads, w.eps, false)?;
    g.add(pe, y)
}

/// Enhanced patch embeddings `pe + Block(Proj(LATENT_SCALE * latent_toks))`.
pub fn adapt(latent_toks: &Tensor, patch_embeddings: &Tensor, w: &AdapterWeights) -> Result<Tensor> {
    let mut g = Graph::new();
    let vars = AdapterVars::new(&mut g, w, false);
    let l = g.constant(latent_toks.clone());
    let pe = g.constant(patch_embeddings.clone());
    let out = adapt_graph(&mut g, l, pe, w, &vars)?;
    Ok(g.value(out).clone())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub lambda_low: f64,
    pub lambda_high: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { lambda_low: 0.1, lambda_high: 1.0 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda_low) || !ok(self.lambda_high) || (self.lambda_low == 0.0 && self.lambda_high == 0.0) {
            return Err(contract!("loss weights must be non-negative, finite and not both zero: {self:?}"));
        }
        Ok(())
    }

    pub fn report(&self, l_low: f64, l_high: f64) -> LossReport {
        LossReport { l_low, l_high, l_total: self.lambda_low * l_low + self.lambda_high * l_high }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossReport {
    pub l_low: f64,
    pub l_high: f64,
    pub l_total: f64,
}

/// Inputs derived once per training image: everything the loss needs apart
/// from the adapter weights.
#[derive(Clone, Debug)]
pub struct LossInputs {
    pub latent_tokens: Tensor,
    pub decoded_embeddings: Tensor,
    pub target_tokens: Tensor,
    pub l_low: f64,
}

impl LossInputs {
    pub fn new(orig: &RgbImage, decoded: &RgbImage, latent: &Latent, model: &Model) -> Result<Self> {
        if (orig.width(), orig.height()) != (decoded.width(), decoded.height()) {
            return Err(contract!(
                "original {}x{} and decoded {}x{} differ in size",
                orig.width(),
                orig.height(),
                decoded.width(),
                decoded.height()
            ));
        }
        let orig_trace = model.forward(&orig.to_tensor(), Capture::none())?;
        let decoded_embeddings = model.patch_embeddings(&decoded.to_tensor())?;
        let l_low = mse(&orig_trace.patch_embeddings, &decoded_embeddings);
        Ok(LossInputs {
            latent_tokens: latent_tokens(latent, model.config())?,
            decoded_embeddings,
            target_tokens: orig_trace.final_tokens,
            l_low,
        })
    }
}

fn mse(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.numel() as f64
}

/// Builds `L_high` on `g`. With `vars == None` the decoded embeddings enter the
/// blocks unchanged.
fn l_high_graph(
    g: &mut Graph,
    inputs: &LossInputs,
    model: &Model,
    adapter: Option<(&AdapterWeights, &AdapterVars)>,
) -> Result<Var> {
    let pe = g.constant(inputs.decoded_embeddings.clone());
    let fused = match adapter {
        Some((w, vars)) => {
            let l = g.constant(inputs.latent_tokens.clone());
            adapt_graph(g, l, pe, w, vars)?
        }
        None => pe,
    };
    let (out, _) = model.run_blocks(g, fused, Capture::none())?;
    let target = g.constant(inputs.target_tokens.clone());
    g.mse(out, target)
}

/// `L_low` compares raw patch embeddings; `L_high` compares the final tokens
/// of the original with those of the adapter-fused decoded image.
pub fn multi_level_loss(
    orig: &RgbImage,
    decoded: &RgbImage,
    latent: &Latent,
    model: &Model,
    weights: Option<&AdapterWeights>,
    cfg: LossConfig,
) -> Result<LossReport> {
    cfg.validate()?;
    let inputs = LossInputs::new(orig, decoded, latent, model)?;
    loss_from_inputs(&inputs, model, weights, cfg)
}

pub fn loss_from_inputs(
    inputs: &LossInputs,
    model: &Model,
    weights: Option<&AdapterWeights>,
    cfg: LossConfig,
) -> Result<LossReport> {
    let mut g = Graph::new();
    let vars = weights.map(|w| AdapterVars::new(&mut g, w, false));
    let l = l_high_graph(&mut g, inputs, model, weights.zip(vars.as_ref()))?;
    Ok(cfg.report(inputs.l_low, g.value(l).item()?))
}

/// Loss report plus `d L_total / d p` for every adapter parameter, in
/// [`AdapterWeights::params`] order.
pub fn loss_and_grads(
    inputs: &LossInputs,
    model: &Model,
    weights: &AdapterWeights,
    cfg: LossConfig,
) -> Result<(LossReport, Vec<Tensor>)> {
    let mut g = Graph::new();
    let vars = AdapterVars::new(&mut g, weights, true);
    let l = l_high_graph(&mut g, inputs, model, Some((weights, &vars)))?;
    let report = cfg.report(inputs.l_low, g.value(l).item()?);
    g.backward(l)?;
    let grads = vars
        .all()
        .into_iter()
        .zip(weights.params())
        .map(|(v, p)| g.grad(v).map_or_else(|| Tensor::zeros(p.shape()), |t| t.map(|x| x * cfg.lambda_high)))
        .collect();
    Ok((report, grads))
}
