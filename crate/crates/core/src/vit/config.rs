use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::formats::{Entry, WeightContainer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViTConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub dim: usize,
    pub heads: usize,
    pub layers: usize,
    pub mlp_ratio: usize,
    #[serde(default = "yes")]
    pub has_cls_token: bool,
    /// LayerNorm on the embedded sequence before the first block.
    #[serde(default)]
    pub pre_norm: bool,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
}

fn yes() -> bool {
    true
}

fn default_eps() -> f64 {
    1e-5
}

pub const META_CONFIG: &str = "meta.vit_config";

impl ViTConfig {
    /// 32 px input, 8 px patches, width 32, 4 heads, 4 layers.
    pub fn toy() -> Self {
        ViTConfig {
            image_size: 32,
            patch_size: 8,
            dim: 32,
            heads: 4,
            layers: 4,
            mlp_ratio: 4,
            has_cls_token: true,
            pre_norm: false,
            layer_norm_eps: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.image_size == 0 || !self.image_size.is_multiple_of(self.patch_size) {
            return Err(contract!(
                "image_size {} must be a positive multiple of patch_size {}",
                self.image_size,
                self.patch_size
            ));
        }
        if self.heads == 0 || self.dim == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(contract!("dim {} must be a positive multiple of heads {}", self.dim, self.heads));
        }
        if self.layers == 0 {
            return Err(contract!("a ViT needs at least one layer"));
        }
        if self.mlp_ratio == 0 {
            return Err(contract!("mlp_ratio must be positive"));
        }
        if !(self.layer_norm_eps > 0.0) {
            return Err(contract!("layer_norm_eps must be positive"));
        }
        Ok(())
    }

    /// Patches per side.
    pub fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn num_patches(&self) -> usize {
        self.grid() * self.grid()
    }

    pub fn num_tokens(&self) -> usize {
        self.num_patches() + usize::from(self.has_cls_token)
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn hidden(&self) -> usize {
        self.dim * self.mlp_ratio
    }

    /// `[image_size, patch_size, dim, heads, layers, mlp_ratio, has_cls, pre_norm, -log10(eps)]`.
    pub fn to_meta(&self) -> Entry {
        let vals = [
            self.image_size as f32,
            self.patch_size as f32,
            self.dim as f32,
            self.heads as f32,
            self.layers as f32,
            self.mlp_ratio as f32,
            self.has_cls_token as u8 as f32,
            self.pre_norm as u8 as f32,
            -(self.layer_norm_eps.log10()) as f32,
        ];
        Entry::new(META_CONFIG, vec![9], vals.to_vec()).expect("fixed layout")
    }

    pub fn from_container(wc: &WeightContainer) -> Result<Option<Self>> {
        let Some(e) = wc.get(META_CONFIG) else { return Ok(None) };
        if e.data.len() != 9 {
            return Err(Error::Format(format!("{META_CONFIG} must hold 9 values")));
        }
        let int = |i: usize| -> Result<usize> {
            let v = e.data[i];
            if v < 0.0 || v.fract() != 0.0 || v > 1e7 {
                return Err(Error::Format(format!("{META_CONFIG}[{i}] = {v} is not a count")));
            }
            Ok(v as usize)
        };
        let cfg = ViTConfig {
            image_size: int(0)?,
            patch_size: int(1)?,
            dim: int(2)?,
            heads: int(3)?,
            layers: int(4)?,
            mlp_ratio: int(5)?,
            has_cls_token: int(6)? != 0,
            pre_norm: int(7)? != 0,
            layer_norm_eps: 10f64.powf(-(e.data[8] as f64)),
        };
        cfg.validate()?;
        Ok(Some(cfg))
    }
}
