use super::{hierarchical_fuse, importance_map, quantize_map, ContinuousMap, GuidanceMap, DEFAULT_K, DEFAULT_LAYERS};
use crate::error::{contract, Result};
use crate::image::RgbImage;
use crate::vit::{resize_bilinear, Capture, Model};

#[derive(Clone, Debug, PartialEq)]
pub struct GuideOptions {
    pub k: f64,
    pub rows: usize,
    pub cols: usize,
    pub layers: Vec<usize>,
    pub level_count: u8,
    /// Tile layout `(rows, cols)`; each tile gets its own local map.
    pub tiles: Option<(usize, usize)>,
}

impl Default for GuideOptions {
    fn default() -> Self {
        GuideOptions { k: DEFAULT_K, rows: 8, cols: 8, layers: DEFAULT_LAYERS.to_vec(), level_count: 3, tiles: None }
    }
}

fn image_map(model: &Model, img: &RgbImage, layers: &[usize], rows: usize, cols: usize) -> Result<ContinuousMap> {
    let s = model.config().image_size;
    let capture = Capture { cls_rows: true, ..Capture::none() };
    let trace = model.forward(&resize_bilinear(img, s, s)?, capture)?;
    importance_map(&trace, layers, rows, cols)
}

/// Guidance levels for a whole image.
///
/// The image is resized (aspect ratio not preserved) to the model input so
/// the map covers every coded pixel. With tiles, a global map at the tile-map
/// resolution is fused with one map per tile before quantisation.
pub fn guide_image(model: &Model, img: &RgbImage, opts: &GuideOptions) -> Result<GuidanceMap> {
    let continuous = match opts.tiles {
        None => image_map(model, img, &opts.layers, opts.rows, opts.cols)?,
        Some((tr, tc)) => {
            if tr == 0 || tc == 0 || !opts.rows.is_multiple_of(tr) || !opts.cols.is_multiple_of(tc) {
                return Err(contract!("{}x{} map cannot be split into {tr}x{tc} tiles", opts.rows, opts.cols));
            }
            let (w, h) = (img.width(), img.height());
            if w < tc || h < tr {
                return Err(contract!("{w}x{h} image is too small for {tr}x{tc} tiles"));
            }
            let (lr, lc) = (opts.rows / tr, opts.cols / tc);
            let global = image_map(model, img, &opts.layers, lr, lc)?;
            let mut locals = Vec::with_capacity(tr * tc);
            for r in 0..tr {
                let (y0, y1) = (r * h / tr, (r + 1) * h / tr);
                for c in 0..tc {
                    let (x0, x1) = (c * w / tc, (c + 1) * w / tc);
                    let tile = img.crop(x0, y0, x1 - x0, y1 - y0)?;
                    locals.push(image_map(model, &tile, &opts.layers, lr, lc)?);
                }
            }
            hierarchical_fuse(&global, &locals, tr, tc)?
        }
    };
    quantize_map(&continuous, opts.k, opts.level_count)
}
