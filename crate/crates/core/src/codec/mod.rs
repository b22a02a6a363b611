//! Variable-rate 8x8 block-DCT codec with guidance-modulated quantisation.
//!
//! Pipeline: RGB to zero-centred YCbCr, edge-replicated padding to a multiple
//! of 8, per-block orthonormal DCT, uniform quantisation with a per-block step
//! `S_p * gamma^-level`, zigzag scan and context-adaptive range coding. The
//! guidance level of a block is the map cell containing the block centre.

pub mod bitstream;
pub mod color;
pub mod dct;
pub mod entropy;
pub mod range_coder;

use crate::error::{contract, Error, Result};
use crate::guidance::GuidanceMap;
use crate::image::RgbImage;
use crate::metrics::{bpp, psnr, RdPoint};
pub use bitstream::Header;

/// Base quantiser steps `64 * 2^(-p / 1.5)` for presets `p = 0..=9`.
pub const PRESET_STEPS: [f64; 10] = [
    64.0,
    40.31747359663594,
    25.398416831491193,
    16.0,
    10.079368399158986,
    6.349604207872798,
    4.0,
    2.5198420997897464,
    1.5874010519681996,
    1.0,
];

pub const DEFAULT_GAMMA: f64 = 2.0;
pub const GAMMA_MIN: f64 = 1.1;
pub const GAMMA_MAX: f64 = 8.0;
/// Decoder refuses streams with more pixels than this unless told otherwise.
pub const DEFAULT_MAX_PIXELS: usize = 1 << 24;

/// Quality preset; higher index means a finer step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Preset(u8);

impl Preset {
    pub fn new(index: u8) -> Result<Self> {
        if usize::from(index) < PRESET_STEPS.len() {
            Ok(Preset(index))
        } else {
            Err(contract!("preset must be 0..=9, got {index}"))
        }
    }

    pub fn all() -> impl Iterator<Item = Preset> {
        (0..PRESET_STEPS.len() as u8).map(Preset)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn step(self) -> f64 {
        PRESET_STEPS[usize::from(self.0)]
    }
}

/// Step ratio between adjacent guidance levels, stored as a multiple of 1/16.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gamma(u8);

impl Gamma {
    /// Rounds `gamma` to the nearest 1/16.
    pub fn new(gamma: f64) -> Result<Self> {
        if !(GAMMA_MIN..=GAMMA_MAX).contains(&gamma) {
            return Err(contract!("gamma must lie in [{GAMMA_MIN}, {GAMMA_MAX}], got {gamma}"));
        }
        Ok(Gamma((gamma * 16.0).round() as u8))
    }

    pub fn from_code(code: u8) -> Result<Self> {
        let min = (GAMMA_MIN * 16.0).round() as u8;
        let max = (GAMMA_MAX * 16.0).round() as u8;
        if (min..=max).contains(&code) {
            Ok(Gamma(code))
        } else {
            Err(Error::Format(format!("gamma code {code} outside {min}..={max}")))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 16.0
    }
}

impl Default for Gamma {
    fn default() -> Self {
        Gamma((DEFAULT_GAMMA * 16.0) as u8)
    }
}

/// `S_p * gamma^(-level)`, by repeated multiplication or division.
pub fn step_for_block(preset: Preset, gamma: f64, level: i8) -> f64 {
    let mut s = preset.step();
    for _ in 0..level.unsigned_abs() {
        if level > 0 {
            s /= gamma;
        } else {
            s *= gamma;
        }
    }
    s
}

/// Dequantised DCT coefficients of every block, `[block][channel][v * 8 + u]`
/// with blocks in raster order and channels Y, Cb, Cr.
#[derive(Clone, Debug, PartialEq)]
pub struct Latent {
    pub width: usize,
    pub height: usize,
    pub blocks_x: usize,
    pub blocks_y: usize,
    pub coeffs: Vec<f64>,
}

impl Latent {
    pub fn block(&self, bx: usize, by: usize, ch: usize) -> &[f64] {
        let start = ((by * self.blocks_x + bx) * 3 + ch) * 64;
        &self.coeffs[start..start + 64]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks_x * self.blocks_y
    }
}

#[derive(Clone, Debug)]
pub struct EncodeOutput {
    pub bitstream: Vec<u8>,
    /// Quantised coefficients, laid out like [`Latent::coeffs`].
    pub symbols: Vec<i32>,
    /// Model code length of each block in bits (all channels, header excluded).
    pub block_bits: Vec<f64>,
    pub latent: Latent,
}

#[derive(Clone, Debug)]
pub struct Decoded {
    pub header: Header,
    pub image: RgbImage,
    pub latent: Latent,
    pub guidance: Option<GuidanceMap>,
    pub symbols: Vec<i32>,
}

/// Guidance level of every block in raster order.
fn block_levels(width: usize, height: usize, guidance: Option<&GuidanceMap>) -> Vec<i8> {
    let (bx, by) = (width.div_ceil(8), height.div_ceil(8));
    let mut out = Vec::with_capacity(bx * by);
    for y in 0..by {
        for x in 0..bx {
            out.push(match guidance {
                None => 0,
                Some(m) => {
                    let r = ((y * 8 + 4) * m.rows() / height).min(m.rows() - 1);
                    let c = ((x * 8 + 4) * m.cols() / width).min(m.cols() - 1);
                    m.at(r, c)
                }
            });
        }
    }
    out
}

fn to_zigzag(natural: &[i32]) -> [i32; 64] {
    std::array::from_fn(|i| natural[dct::ZIGZAG[i]])
}

pub fn encode(image: &RgbImage, preset: Preset, gamma: Gamma, guidance: Option<&GuidanceMap>) -> Result<EncodeOutput> {
    let (w, h) = (image.width(), image.height());
    if w < 8 || h < 8 {
        return Err(contract!("image {w}x{h} is smaller than one 8x8 block"));
    }
    let (Ok(width), Ok(height)) = (u16::try_from(w), u16::try_from(h)) else {
        return Err(contract!("image {w}x{h} exceeds 65535 pixels per side"));
    };
    let (bx, by) = (w.div_ceil(8), h.div_ceil(8));
    let levels = block_levels(w, h, guidance);
    let mut enc = entropy::BlockEncoder::new();
    let mut symbols = Vec::with_capacity(bx * by * 192);
    let mut coeffs = Vec::with_capacity(bx * by * 192);
    let mut block_bits = Vec::with_capacity(bx * by);
    let mut planes = [[0.0f64; 64]; 3];
    for (b, &level) in levels.iter().enumerate() {
        let (x0, y0) = ((b % bx) * 8, (b / bx) * 8);
        for dy in 0..8 {
            for dx in 0..8 {
                let [r, g, bl] = image.pixel((x0 + dx).min(w - 1), (y0 + dy).min(h - 1));
                let ycc = color::rgb_to_ycbcr(f64::from(r), f64::from(g), f64::from(bl));
                for (plane, v) in planes.iter_mut().zip(ycc) {
                    plane[dy * 8 + dx] = v;
                }
            }
        }
        let step = step_for_block(preset, gamma.value(), level);
        let mut bits = 0.0;
        for (ch, plane) in planes.iter().enumerate() {
            let start = symbols.len();
            for c in dct::forward(plane) {
                let q = (c / step).round() as i32;
                symbols.push(q);
                coeffs.push(f64::from(q) * step);
            }
            bits += enc.encode_block(ch, &to_zigzag(&symbols[start..]));
        }
        block_bits.push(bits);
    }
    let header = Header { width, height, preset, gamma };
    let bitstream = bitstream::write(&header, guidance, &enc.finish())?;
    let latent = Latent { width: w, height: h, blocks_x: bx, blocks_y: by, coeffs };
    Ok(EncodeOutput { bitstream, symbols, block_bits, latent })
}

pub fn decode(bytes: &[u8]) -> Result<Decoded> {
    decode_with_limit(bytes, DEFAULT_MAX_PIXELS)
}

/// [`decode`] refusing images with more than `max_pixels` pixels.
pub fn decode_with_limit(bytes: &[u8], max_pixels: usize) -> Result<Decoded> {
    let parsed = bitstream::parse(bytes)?;
    let header = parsed.header;
    let (w, h) = (usize::from(header.width), usize::from(header.height));
    if w * h > max_pixels {
        return Err(Error::Unsupported(format!("{w}x{h} image exceeds the {max_pixels}-pixel decode limit")));
    }
    let (bx, by) = (w.div_ceil(8), h.div_ceil(8));
    let levels = block_levels(w, h, parsed.guidance.as_ref());
    let mut dec = entropy::BlockDecoder::new(parsed.payload, parsed.payload_offset)?;
    let mut symbols = vec![0i32; bx * by * 192];
    let mut coeffs = vec![0.0f64; bx * by * 192];
    for (b, &level) in levels.iter().enumerate() {
        let step = step_for_block(header.preset, header.gamma.value(), level);
        for ch in 0..3 {
            let zz = dec.decode_block(ch)?;
            let start = (b * 3 + ch) * 64;
            for (i, &q) in zz.iter().enumerate() {
                symbols[start + dct::ZIGZAG[i]] = q;
                coeffs[start + dct::ZIGZAG[i]] = f64::from(q) * step;
            }
        }
    }
    dec.finish()?;
    let latent = Latent { width: w, height: h, blocks_x: bx, blocks_y: by, coeffs };
    let image = reconstruct(&latent);
    Ok(Decoded { header, image, latent, guidance: parsed.guidance, symbols })
}

/// Inverse DCT, colour conversion and cropping of a latent.
pub fn reconstruct(latent: &Latent) -> RgbImage {
    let (w, h) = (latent.width, latent.height);
    let mut data = vec![0u8; w * h * 3];
    for by in 0..latent.blocks_y {
        for bx in 0..latent.blocks_x {
            let planes: [[f64; 64]; 3] =
                std::array::from_fn(|ch| dct::inverse(latent.block(bx, by, ch).try_into().expect("64 coefficients")));
            for dy in 0..8 {
                for dx in 0..8 {
                    let (x, y) = (bx * 8 + dx, by * 8 + dy);
                    if x >= w || y >= h {
                        continue;
                    }
                    let i = dy * 8 + dx;
                    let rgb = color::ycbcr_to_rgb(planes[0][i], planes[1][i], planes[2][i]);
                    let o = (y * w + x) * 3;
                    for c in 0..3 {
                        data[o + c] = color::to_u8(rgb[c]);
                    }
                }
            }
        }
    }
    RgbImage::new(w, h, data).expect("sized buffer")
}

/// Encodes and decodes `image` at each preset. An all-base guidance map is
/// treated as no map.
pub fn rd_sweep(image: &RgbImage, presets: &[Preset], gamma: Gamma, guidance: Option<&GuidanceMap>) -> Result<Vec<RdPoint>> {
    if presets.len() < 2 {
        return Err(contract!("rd_sweep needs at least two presets, got {}", presets.len()));
    }
    let guidance = guidance.filter(|m| !m.is_all_base());
    presets
        .iter()
        .map(|&p| {
            let out = encode(image, p, gamma, guidance)?;
            let dec = decode(&out.bitstream)?;
            Ok(RdPoint {
                preset: p.index(),
                bpp: bpp(out.bitstream.len(), image.width(), image.height())?,
                quality: psnr(image, &dec.image)?,
            })
        })
        .collect()
}
