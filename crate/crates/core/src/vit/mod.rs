//! Pre-LN Vision Transformer forward pass with attention capture.
//!
//! Weight names in a [`WeightContainer`](crate::formats::WeightContainer):
//!
//! | name                       | shape                 |
//! |----------------------------|-----------------------|
//! | `patch_embed.weight`       | `[3*patch*patch, dim]`, rows ordered (y, x, channel) |
//! | `patch_embed.bias`         | `[dim]`               |
//! | `cls_token`                | `[dim]` (when the config has a CLS token) |
//! | `pos_embed`                | `[tokens, dim]`       |
//! | `ln_pre.gain`, `ln_pre.bias` | `[dim]` (when `pre_norm` is set) |
//! | `layer{i}.<block tensor>`  | see [`BLOCK_TENSORS`] |
//! | `meta.vit_config`          | optional, see [`ViTConfig::to_meta`] |
//! | `meta.norm_mean`, `meta.norm_std` | optional `[3]` input normalisation |
//!
//! Linear weights are stored `[in, out]` and applied as `x @ W + b`.

mod block;
mod config;
mod model;
mod preprocess;
pub mod toy;

pub use block::{block_forward, block_shape, BlockCapture, BLOCK_TENSORS};
pub use config::ViTConfig;
pub use model::{Capture, LayerTrace, Model, Normalization, ViTTrace};
pub use preprocess::{preprocess, preprocess_file, resize_bilinear};
