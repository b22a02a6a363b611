use std::path::Path;

use crate::error::{contract, Result};
use crate::formats::read_ppm;
use crate::image::RgbImage;
use crate::tensor::Tensor;

/// Bilinear resample to `out_w x out_h` using pixel-centre alignment with
/// edge clamping. Returns `out_h x out_w x 3` values in `[0, 1]`.
pub fn resize_bilinear(img: &RgbImage, out_w: usize, out_h: usize) -> Result<Tensor> {
    if out_w == 0 || out_h == 0 {
        return Err(contract!("resize target must be non-empty"));
    }
    let (w, h) = (img.width(), img.height());
    let sx = w as f64 / out_w as f64;
    let sy = h as f64 / out_h as f64;
    let src = |x: usize, y: usize, c: usize| img.data()[(y * w + x) * 3 + c] as f64;
    let axis = |dst: usize, scale: f64, len: usize| {
        let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = pos.floor() as usize;
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, pos - i0 as f64)
    };
    let mut out = Vec::with_capacity(out_w * out_h * 3);
    for y in 0..out_h {
        let (y0, y1, fy) = axis(y, sy, h);
        for x in 0..out_w {
            let (x0, x1, fx) = axis(x, sx, w);
            for c in 0..3 {
                let top = src(x0, y0, c) * (1.0 - fx) + src(x1, y0, c) * fx;
                let bottom = src(x0, y1, c) * (1.0 - fx) + src(x1, y1, c) * fx;
                out.push((top * (1.0 - fy) + bottom * fy) / 255.0);
            }
        }
    }
    Tensor::new(vec![out_h, out_w, 3], out)
}

/// Centre-crops to a square, then resizes to `target x target`. No channel
/// normalisation is applied here.
pub fn preprocess(img: &RgbImage, target: usize) -> Result<Tensor> {
    let side = img.width().min(img.height());
    let square = if img.width() == img.height() {
        img.clone()
    } else {
        img.crop((img.width() - side) / 2, (img.height() - side) / 2, side, side)?
    };
    resize_bilinear(&square, target, target)
}

pub fn preprocess_file(path: impl AsRef<Path>, target: usize) -> Result<Tensor> {
    preprocess(&read_ppm(path)?, target)
}
