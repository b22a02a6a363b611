//! Seeded synthetic test images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::image::RgbImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    Gradient,
    Rectangles,
    Checkerboard,
    Strokes,
    /// Multi-octave value noise with a roughly `1/f` spectrum plus a few soft shapes.
    Natural,
}

impl Pattern {
    pub const ALL: [Pattern; 5] =
        [Pattern::Gradient, Pattern::Rectangles, Pattern::Checkerboard, Pattern::Strokes, Pattern::Natural];
}

pub fn image(pattern: Pattern, width: usize, height: usize, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match pattern {
        Pattern::Gradient => gradient(width, height, &mut rng),
        Pattern::Rectangles => rectangles(width, height, &mut rng),
        Pattern::Checkerboard => checkerboard(width, height, &mut rng),
        Pattern::Strokes => strokes(width, height, &mut rng),
        Pattern::Natural => natural(width, height, &mut rng),
    }
}

/// `n` images cycling through every pattern, seeded from `seed`.
pub fn dataset(n: usize, width: usize, height: usize, seed: u64) -> Vec<RgbImage> {
    (0..n)
        .map(|i| image(Pattern::ALL[i % Pattern::ALL.len()], width, height, seed.wrapping_mul(1_000_003).wrapping_add(i as u64)))
        .collect()
}

fn clamp(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}

fn colour(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random_range(0.0..255.0), rng.random_range(0.0..255.0), rng.random_range(0.0..255.0)]
}

fn gradient(w: usize, h: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let (a, b) = (colour(rng), colour(rng));
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (angle.cos(), angle.sin());
    let span = (w as f64 * dx.abs() + h as f64 * dy.abs()).max(1.0);
    RgbImage::from_fn(w, h, |x, y| {
        let t = ((x as f64 - w as f64 / 2.0) * dx + (y as f64 - h as f64 / 2.0) * dy) / span + 0.5;
        std::array::from_fn(|c| clamp(a[c] + (b[c] - a[c]) * t))
    })
}

fn rectangles(w: usize, h: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let bg = colour(rng);
    let mut data: Vec<[f64; 3]> = vec![bg; w * h];
    for _ in 0..rng.random_range(3..8) {
        let c = colour(rng);
        let (x0, y0) = (rng.random_range(0..w), rng.random_range(0..h));
        let (x1, y1) = (rng.random_range(x0..=w), rng.random_range(y0..=h));
        for y in y0..y1 {
            for x in x0..x1 {
                data[y * w + x] = c;
            }
        }
    }
    RgbImage::from_fn(w, h, |x, y| data[y * w + x].map(clamp))
}

fn checkerboard(w: usize, h: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let (a, b) = (colour(rng), colour(rng));
    let cell = rng.random_range(2..=8usize);
    RgbImage::from_fn(w, h, |x, y| if (x / cell + y / cell) % 2 == 0 { a.map(clamp) } else { b.map(clamp) })
}

fn strokes(w: usize, h: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let bg = colour(rng);
    let mut data: Vec<[f64; 3]> = vec![bg; w * h];
    for _ in 0..rng.random_range(2..6) {
        let c = colour(rng);
        let (mut x, mut y) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
        let mut angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let radius: f64 = rng.random_range(0.8..2.5);
        for _ in 0..(w + h) {
            angle += rng.random_range(-0.3..0.3);
            x += angle.cos();
            y += angle.sin();
            let r = radius.ceil() as isize;
            for oy in -r..=r {
                for ox in -r..=r {
                    let (px, py) = (x as isize + ox, y as isize + oy);
                    if px >= 0 && py >= 0 && (px as usize) < w && (py as usize) < h {
                        let d2 = (px as f64 - x).powi(2) + (py as f64 - y).powi(2);
                        if d2 <= radius * radius {
                            data[py as usize * w + px as usize] = c;
                        }
                    }
                }
            }
        }
    }
    RgbImage::from_fn(w, h, |x, y| data[y * w + x].map(clamp))
}

/// Bilinearly interpolated `n x n` lattice of uniform noise in `[-1, 1]`.
fn value_noise(w: usize, h: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let grid: Vec<f64> = (0..(n + 1) * (n + 1)).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let gy = y as f64 * n as f64 / h as f64;
        let (iy, fy) = (gy.floor() as usize, gy.fract());
        for x in 0..w {
            let gx = x as f64 * n as f64 / w as f64;
            let (ix, fx) = (gx.floor() as usize, gx.fract());
            let g = |i: usize, j: usize| grid[j * (n + 1) + i];
            let top = g(ix, iy) * (1.0 - fx) + g(ix + 1, iy) * fx;
            let bot = g(ix, iy + 1) * (1.0 - fx) + g(ix + 1, iy + 1) * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

fn natural(w: usize, h: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let base = colour(rng);
    let tint = colour(rng);
    let mut lum = vec![0.0; w * h];
    let mut chroma = vec![0.0; w * h];
    let mut cells = 2;
    let mut amp = 70.0;
    while cells <= w.max(h) {
        for (l, v) in lum.iter_mut().zip(value_noise(w, h, cells, rng)) {
            *l += amp * v;
        }
        for (c, v) in chroma.iter_mut().zip(value_noise(w, h, cells, rng)) {
            *c += 0.4 * amp * v;
        }
        cells *= 2;
        amp *= 0.5;
    }
    let mut blobs = Vec::new();
    for _ in 0..rng.random_range(1..4) {
        blobs.push((
            rng.random_range(0.0..w as f64),
            rng.random_range(0.0..h as f64),
            rng.random_range(2.0..(w.min(h) as f64 / 3.0).max(3.0)),
            colour(rng),
        ));
    }
    RgbImage::from_fn(w, h, |x, y| {
        let i = y * w + x;
        let mut px: [f64; 3] = std::array::from_fn(|c| 0.5 * base[c] + 0.3 * tint[c] * (1.0 + chroma[i] / 100.0) + lum[i]);
        for &(cx, cy, r, col) in &blobs {
            let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let a = 1.0 / (1.0 + ((d - r) / 1.5).exp());
            for c in 0..3 {
                px[c] = px[c] * (1.0 - a) + col[c] * a;
            }
        }
        px.map(clamp)
    })
}
