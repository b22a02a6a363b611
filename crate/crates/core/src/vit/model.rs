use std::sync::Arc;

use super::block::{block_forward, block_shape, BLOCK_TENSORS};
use super::ViTConfig;
use crate::error::{contract, Error, Result};
use crate::formats::WeightContainer;
use crate::tensor::{Graph, Tensor, Var};

/// Per-channel input normalisation stored with exported weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Normalization {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

/// What [`Model::forward`] records per layer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Capture {
    pub attention: bool,
    pub tokens: bool,
    pub cls_rows: bool,
    /// Keep every head's attention as well as the head mean.
    pub per_head: bool,
}

impl Capture {
    pub fn all() -> Self {
        Capture { attention: true, tokens: true, cls_rows: true, per_head: false }
    }

    pub fn none() -> Self {
        Capture::default()
    }
}

#[derive(Clone, Debug, Default)]
pub struct LayerTrace {
    /// Block output, `N x dim`.
    pub tokens: Option<Tensor>,
    /// Head-averaged attention, `N x N`.
    pub attention: Option<Tensor>,
    /// Row 0 of the averaged attention (CLS query against every key).
    pub cls_row: Option<Vec<f64>>,
    pub heads: Option<Vec<Tensor>>,
}

#[derive(Clone, Debug)]
pub struct ViTTrace {
    pub layers: Vec<LayerTrace>,
    /// Projected patches plus position embeddings, before any block:
    /// `num_patches x dim`, CLS excluded.
    pub patch_embeddings: Tensor,
    /// Last block's output, `N x dim`.
    pub final_tokens: Tensor,
    pub has_cls: bool,
    /// Patches per side.
    pub grid: usize,
}

impl ViTTrace {
    pub fn num_tokens(&self) -> usize {
        self.final_tokens.shape()[0]
    }

    /// Dumps captured tensors as `layer{i}.attention`, `layer{i}.tokens`,
    /// `patch_embeddings` and `final_tokens`.
    pub fn to_container(&self) -> Result<WeightContainer> {
        let mut wc = WeightContainer::new();
        for (i, l) in self.layers.iter().enumerate() {
            if let Some(a) = &l.attention {
                wc.insert_tensor(format!("layer{i}.attention"), a)?;
            }
            if let Some(t) = &l.tokens {
                wc.insert_tensor(format!("layer{i}.tokens"), t)?;
            }
        }
        wc.insert_tensor("patch_embeddings", &self.patch_embeddings)?;
        wc.insert_tensor("final_tokens", &self.final_tokens)?;
        Ok(wc)
    }
}

/// Immutable ViT with weights widened to `f64`.
#[derive(Clone, Debug)]
pub struct Model {
    config: ViTConfig,
    patch_w: Arc<Tensor>,
    patch_b: Arc<Tensor>,
    /// Stored as a `1 x dim` row.
    cls: Option<Arc<Tensor>>,
    pos: Arc<Tensor>,
    pre_norm: Option<[Arc<Tensor>; 2]>,
    blocks: Vec<Vec<Arc<Tensor>>>,
    normalization: Option<Normalization>,
}

fn fetch(wc: &WeightContainer, name: &str, shape: &[usize]) -> Result<Arc<Tensor>> {
    let e = wc.get(name).ok_or_else(|| Error::Load { tensor: name.into(), msg: "missing".into() })?;
    if e.shape() != shape {
        return Err(Error::Load {
            tensor: name.into(),
            msg: format!("shape {:?}, expected {:?}", e.shape(), shape),
        });
    }
    Ok(Arc::new(e.to_tensor()))
}

impl Model {
    pub fn load(wc: &WeightContainer, config: &ViTConfig) -> Result<Self> {
        config.validate()?;
        let (d, p) = (config.dim, config.patch_size);
        let patch_w = fetch(wc, "patch_embed.weight", &[3 * p * p, d])?;
        let patch_b = fetch(wc, "patch_embed.bias", &[d])?;
        let cls = match config.has_cls_token {
            true => Some(Arc::new(fetch(wc, "cls_token", &[d])?.as_ref().clone().reshape(vec![1, d])?)),
            false => None,
        };
        let pos = fetch(wc, "pos_embed", &[config.num_tokens(), d])?;
        let pre_norm = if config.pre_norm {
            Some([fetch(wc, "ln_pre.gain", &[d])?, fetch(wc, "ln_pre.bias", &[d])?])
        } else {
            None
        };
        let blocks = (0..config.layers)
            .map(|i| {
                BLOCK_TENSORS
                    .iter()
                    .map(|s| fetch(wc, &format!("layer{i}.{s}"), &block_shape(s, d, config.hidden())))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let normalization = match (wc.get("meta.norm_mean"), wc.get("meta.norm_std")) {
            (Some(m), Some(s)) if m.data.len() == 3 && s.data.len() == 3 => {
                if s.data.iter().any(|&v| !(v > 0.0)) {
                    return Err(Error::Load { tensor: "meta.norm_std".into(), msg: "must be positive".into() });
                }
                Some(Normalization {
                    mean: [m.data[0] as f64, m.data[1] as f64, m.data[2] as f64],
                    std: [s.data[0] as f64, s.data[1] as f64, s.data[2] as f64],
                })
            }
            (None, None) => None,
            _ => {
                return Err(Error::Load {
                    tensor: "meta.norm_mean".into(),
                    msg: "normalisation needs both [3] mean and [3] std".into(),
                })
            }
        };
        Ok(Model { config: config.clone(), patch_w, patch_b, cls, pos, pre_norm, blocks, normalization })
    }

    pub fn config(&self) -> &ViTConfig {
        &self.config
    }

    pub fn normalization(&self) -> Option<Normalization> {
        self.normalization
    }

    pub fn block_weights(&self, layer: usize) -> &[Arc<Tensor>] {
        &self.blocks[layer]
    }

    /// Splits an `S x S x 3` image into `num_patches x 3*p*p` rows, applying
    /// the stored normalisation if any.
    pub fn patchify(&self, image: &Tensor) -> Result<Tensor> {
        let s = self.config.image_size;
        if image.shape() != [s, s, 3] {
            return Err(contract!("forward expects a {s}x{s}x3 image, got {:?}", image.shape()));
        }
        if image.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(contract!("image values must lie in [0, 1]"));
        }
        let p = self.config.patch_size;
        let grid = self.config.grid();
        let px = image.data();
        let mut out = Vec::with_capacity(s * s * 3);
        for py in 0..grid {
            for pxi in 0..grid {
                for y in 0..p {
                    for x in 0..p {
                        let base = ((py * p + y) * s + pxi * p + x) * 3;
                        for c in 0..3 {
                            let v = px[base + c];
                            out.push(match &self.normalization {
                                Some(n) => (v - n.mean[c]) / n.std[c],
                                None => v,
                            });
                        }
                    }
                }
            }
        }
        Tensor::new(vec![grid * grid, 3 * p * p], out)
    }

    /// Adds the patch embeddings of `image` to `g` as a constant.
    pub fn embed(&self, g: &mut Graph, image: &Tensor) -> Result<Var> {
        let patches = g.constant(self.patchify(image)?);
        let w = g.shared_leaf(self.patch_w.clone(), false);
        let b = g.shared_leaf(self.patch_b.clone(), false);
        let proj = g.linear(patches, w, b)?;
        let pos = g.shared_leaf(self.pos.clone(), false);
        let n = self.config.num_tokens();
        let pos_patches = g.slice(pos, 0, n - self.config.num_patches(), n)?;
        g.add(proj, pos_patches)
    }

    pub fn patch_embeddings(&self, image: &Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let v = self.embed(&mut g, image)?;
        Ok(g.value(v).clone())
    }

    /// Runs every block starting from (possibly modified) patch embeddings.
    /// Returns the final tokens node and per-layer captures.
    pub fn run_blocks(&self, g: &mut Graph, patch_embeddings: Var, capture: Capture) -> Result<(Var, Vec<LayerTrace>)> {
        let cfg = &self.config;
        let mut x = patch_embeddings;
        if let Some(cls) = &self.cls {
            let c = g.shared_leaf(cls.clone(), false);
            let pos = g.shared_leaf(self.pos.clone(), false);
            let pos0 = g.slice(pos, 0, 0, 1)?;
            let cls_row = g.add(c, pos0)?;
            x = g.concat(&[cls_row, x], 0)?;
        }
        if let Some([gain, bias]) = &self.pre_norm {
            let gn = g.shared_leaf(gain.clone(), false);
            let bn = g.shared_leaf(bias.clone(), false);
            x = g.layernorm(x, gn, bn, cfg.layer_norm_eps)?;
        }
        let keep_heads = capture.per_head && capture.attention;
        let mut layers = Vec::with_capacity(cfg.layers);
        for block in &self.blocks {
            let params: Vec<Var> = block.iter().map(|t| g.shared_leaf(t.clone(), false)).collect();
            let (out, cap) = block_forward(g, x, &params, cfg.heads, cfg.layer_norm_eps, keep_heads)?;
            x = out;
            let cls_row = (capture.cls_rows && cfg.has_cls_token).then(|| cap.attention.row(0).to_vec());
            layers.push(LayerTrace {
                tokens: capture.tokens.then(|| g.value(x).clone()),
                cls_row,
                heads: cap.per_head,
                attention: capture.attention.then_some(cap.attention),
            });
        }
        Ok((x, layers))
    }

    pub fn forward(&self, image: &Tensor, capture: Capture) -> Result<ViTTrace> {
        let mut g = Graph::new();
        let pe = self.embed(&mut g, image)?;
        let (out, layers) = self.run_blocks(&mut g, pe, capture)?;
        Ok(ViTTrace {
            layers,
            patch_embeddings: g.value(pe).clone(),
            final_tokens: g.value(out).clone(),
            has_cls: self.config.has_cls_token,
            grid: self.config.grid(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vit::toy::{append_identity_blocks, random_weights, ToyOptions};

    fn toy(opts: ToyOptions) -> (WeightContainer, ViTConfig, Model) {
        let cfg = ViTConfig::toy();
        let wc = random_weights(&cfg, 7, opts).unwrap();
        let m = Model::load(&wc, &cfg).unwrap();
        (wc, cfg, m)
    }

    fn gradient_image(s: usize) -> Tensor {
        let data = (0..s * s * 3).map(|i| ((i * 37) % 256) as f64 / 255.0).collect();
        Tensor::new(vec![s, s, 3], data).unwrap()
    }

    #[test]
    fn token_count_and_row_sums() {
        let (_, _, m) = toy(ToyOptions::default());
        let tr = m.forward(&gradient_image(32), Capture::all()).unwrap();
        assert_eq!(tr.num_tokens(), 17);
        assert_eq!(tr.layers.len(), 4);
        assert_eq!(tr.patch_embeddings.shape(), &[16, 32]);
        for l in &tr.layers {
            let a = l.attention.as_ref().unwrap();
            for r in 0..17 {
                assert!((a.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            assert_eq!(l.cls_row.as_ref().unwrap().as_slice(), a.row(0));
        }
    }

    #[test]
    fn zero_query_key_gives_uniform_attention() {
        let (_, _, m) = toy(ToyOptions { uniform_attention: true });
        let tr = m.forward(&gradient_image(32), Capture::all()).unwrap();
        for l in &tr.layers {
            for v in l.attention.as_ref().unwrap().data() {
                assert!((v - 1.0 / 17.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn missing_layernorm_gain_is_named() {
        let (wc, cfg, _) = toy(ToyOptions::default());
        let mut broken = WeightContainer::new();
        for e in wc.entries().iter().filter(|e| e.name != "layer2.ln1.gain") {
            broken.insert(e.clone()).unwrap();
        }
        let err = Model::load(&broken, &cfg).unwrap_err();
        assert!(matches!(&err, Error::Load { tensor, .. } if tensor == "layer2.ln1.gain"), "{err}");
    }

    #[test]
    fn wrong_cls_length_is_shape_error() {
        let (wc, cfg, _) = toy(ToyOptions::default());
        let mut broken = WeightContainer::new();
        for e in wc.entries() {
            let e = if e.name == "cls_token" {
                crate::formats::Entry::new("cls_token", vec![31], vec![0.0; 31]).unwrap()
            } else {
                e.clone()
            };
            broken.insert(e).unwrap();
        }
        let err = Model::load(&broken, &cfg).unwrap_err().to_string();
        assert!(err.contains("cls_token") && err.contains("[31]"), "{err}");
    }

    #[test]
    fn wrong_image_size_is_rejected() {
        let (_, _, m) = toy(ToyOptions::default());
        assert_eq!(m.forward(&gradient_image(16), Capture::none()).unwrap_err().code(), "contract");
    }

    #[test]
    fn identity_blocks_pass_tokens_through() {
        let (wc, cfg, m) = toy(ToyOptions::default());
        let (wc2, cfg2) = append_identity_blocks(&wc, &cfg, cfg.layers, 99).unwrap();
        let deep = Model::load(&wc2, &cfg2).unwrap();
        let img = gradient_image(32);
        let a = m.forward(&img, Capture::none()).unwrap().final_tokens;
        let b = deep.forward(&img, Capture::none()).unwrap().final_tokens;
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn trace_dump_names() {
        let (_, _, m) = toy(ToyOptions::default());
        let wc = m.forward(&gradient_image(32), Capture::all()).unwrap().to_container().unwrap();
        assert_eq!(wc.get("layer3.attention").unwrap().dims, vec![17, 17]);
        assert_eq!(wc.get("layer0.tokens").unwrap().dims, vec![17, 32]);
    }
}
