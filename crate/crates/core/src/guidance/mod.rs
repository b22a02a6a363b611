//! Encoder-side rate guidance from shallow-layer CLS attention.
//!
//! [`importance_map`] averages CLS attention over a few early layers and
//! pools it to a small grid, [`quantize_map`] turns it into rate levels with
//! `mu +- k*sigma` thresholds, [`hierarchical_fuse`] combines a whole-image
//! map with per-tile maps, [`guide_image`] runs the whole chain on an image, and [`pack_map`] stores levels at 2 bits per cell.

mod fuse;
mod importance;
mod map;
mod pack;
mod pipeline;
mod quantize;

pub use fuse::hierarchical_fuse;
pub use importance::{area_pool, importance_map, DEFAULT_LAYERS};
pub use map::{ContinuousMap, GuidanceMap, MapStats, MAX_CELLS};
pub use pack::{pack_map, packed_len, unpack_map};
pub use pipeline::{guide_image, GuideOptions};
pub use quantize::{quantize_map, DEFAULT_K};
