//! Codec measurements shared by the codec and acceptance tests.

use super::*;
use ctam_core::codec::{decode, encode, Gamma, Preset};
use ctam_core::guidance::GuidanceMap;
use ctam_core::metrics::mse;
use ctam_core::RgbImage;
use rand::Rng;

pub const EXACTNESS_PRESETS: [u8; 3] = [0, 4, 9];

pub struct ExactnessReport {
    pub streams: usize,
    /// Streams whose decoded symbols or latent differ from the encoder's.
    pub mismatches: usize,
    /// Streams that differ between two encodes of the same input.
    pub nondeterministic: usize,
    /// FNV-1a over every bitstream, in order.
    pub digest: u64,
}

/// 100 seeded random images of random size, each coded at three presets.
pub fn exactness_corpus() -> ExactnessReport {
    let mut rep = ExactnessReport { streams: 0, mismatches: 0, nondeterministic: 0, digest: 0xcbf2_9ce4_8422_2325 };
    for seed in 0..100u64 {
        let mut r = rng(seed);
        let (w, h) = (r.random_range(8..48usize), r.random_range(8..48usize));
        let img = random_image(seed, w, h);
        for p in EXACTNESS_PRESETS {
            let p = Preset::new(p).unwrap();
            let a = encode(&img, p, Gamma::default(), None).unwrap();
            let b = encode(&img, p, Gamma::default(), None).unwrap();
            rep.streams += 1;
            rep.nondeterministic += usize::from(a.bitstream != b.bitstream);
            let d = decode(&a.bitstream).unwrap();
            rep.mismatches += usize::from(d.symbols != a.symbols || d.latent != a.latent);
            for &byte in &a.bitstream {
                rep.digest = (rep.digest ^ u64::from(byte)).wrapping_mul(0x0100_0000_01b3);
            }
        }
    }
    rep
}

/// Digest recorded in `tests/golden/codec_digest.txt`; rewritten from
/// `current` when `CTAM_UPDATE_GOLDEN` is set.
pub fn golden_digest(current: u64) -> u64 {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/codec_digest.txt");
    if std::env::var_os("CTAM_UPDATE_GOLDEN").is_some() {
        std::fs::write(path, format!("{current:016x}\n")).unwrap();
    }
    u64::from_str_radix(std::fs::read_to_string(path).unwrap().trim(), 16).unwrap()
}

/// One seeded 8x8 texture tiled over a 64x64 image, 2x2 map with cells
/// `[+1, -1; 0, 0]`. Returns `(bits, mse)` for the `+1`, `0` and `-1` cells.
pub fn region_costs(gamma: f64, preset: u8) -> [(f64, f64); 3] {
    let mut r = rng(2024);
    let tex: Vec<[u8; 3]> = (0..64).map(|_| [r.random(), r.random(), r.random()]).collect();
    let img = RgbImage::from_fn(64, 64, |x, y| tex[(y % 8) * 8 + x % 8]);
    let m = GuidanceMap::new(2, 2, vec![1, -1, 0, 0], 3).unwrap();
    let out = encode(&img, Preset::new(preset).unwrap(), Gamma::new(gamma).unwrap(), Some(&m)).unwrap();
    let dec = decode(&out.bitstream).unwrap().image;
    let cell = |cr: usize, cc: usize| {
        let mut bits = 0.0;
        for by in cr * 4..cr * 4 + 4 {
            for bx in cc * 4..cc * 4 + 4 {
                bits += out.block_bits[by * 8 + bx];
            }
        }
        let a = img.crop(cc * 32, cr * 32, 32, 32).unwrap();
        let b = dec.crop(cc * 32, cr * 32, 32, 32).unwrap();
        (bits, mse(&a, &b).unwrap())
    };
    [cell(0, 0), cell(1, 1), cell(0, 1)]
}

