//! Attention-guided variable-rate image coding for vision-transformer
//! consumers.
//!
//! The crate bundles the pieces of the pipeline:
//!
//! * [`tensor`]: `f64` tensors with reverse-mode autodiff and Adam.
//! * [`vit`]: a pre-LN Vision Transformer forward pass that records
//!   attention maps and token features.
//! * [`analysis`]: attention inflow/outflow, attention distances, layer-wise
//!   similarity, PCA and stage segmentation.
//! * [`guidance`]: shallow-layer CLS attention importance maps, `mu +- k*sigma`
//!   quantisation, global/local fusion and 2-bit packing.
//! * [`codec`]: a block-DCT codec with a range coder whose quantiser step is
//!   modulated per region by a guidance map.
//! * [`adapter`]: a one-block latent adapter trained with a two-level feature
//!   fidelity loss.
//! * [`metrics`]: PSNR, bits per pixel and Bjontegaard delta rate.
//! * [`formats`]: PPM and the `CTWT` weight container.

pub mod adapter;
pub mod analysis;
pub mod codec;
mod error;
pub mod formats;
pub mod guidance;
mod image;
pub mod metrics;
pub mod synth;
pub mod tensor;
pub mod vit;

pub use error::{Error, Result};
pub use image::RgbImage;
pub use tensor::Tensor;
