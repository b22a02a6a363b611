//! 8x8 orthonormal DCT-II with a fixed basis table.

/// `BASIS[u][x] = a(u) cos((2x + 1) u pi / 16)`, `a(0) = sqrt(1/8)`, else `1/2`.
/// Literal so results do not depend on the platform's `cos`.
#[rustfmt::skip]
const BASIS: [[f64; 8]; 8] = [
    [0.3535533905932738, 0.3535533905932738, 0.3535533905932738, 0.3535533905932738, 0.3535533905932738, 0.3535533905932738, 0.3535533905932738, 0.3535533905932738],
    [0.4903926402016152, 0.4157348061512726, 0.2777851165098011, 0.09754516100806414, -0.09754516100806414, -0.2777851165098011, -0.4157348061512726, -0.4903926402016152],
    [0.46193976625564337, 0.1913417161825449, -0.1913417161825449, -0.46193976625564337, -0.46193976625564337, -0.1913417161825449, 0.1913417161825449, 0.46193976625564337],
    [0.4157348061512726, -0.09754516100806414, -0.4903926402016152, -0.2777851165098011, 0.2777851165098011, 0.4903926402016152, 0.09754516100806414, -0.4157348061512726],
    [0.3535533905932738, -0.3535533905932738, -0.3535533905932738, 0.3535533905932738, 0.3535533905932738, -0.3535533905932738, -0.3535533905932738, 0.3535533905932738],
    [0.2777851165098011, -0.4903926402016152, 0.09754516100806414, 0.4157348061512726, -0.4157348061512726, -0.09754516100806414, 0.4903926402016152, -0.2777851165098011],
    [0.1913417161825449, -0.46193976625564337, 0.46193976625564337, -0.1913417161825449, -0.1913417161825449, 0.46193976625564337, -0.46193976625564337, 0.1913417161825449],
    [0.09754516100806414, -0.2777851165098011, 0.4157348061512726, -0.4903926402016152, 0.4903926402016152, -0.4157348061512726, 0.2777851165098011, -0.09754516100806414],
];

/// Zigzag scan: `ZIGZAG[i]` is the row-major index of the `i`-th coefficient.
#[rustfmt::skip]
pub const ZIGZAG: [usize; 64] = [
     0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
];

/// Row-major spatial block to row-major coefficients (`[v * 8 + u]`, `v` vertical frequency).
pub fn forward(block: &[f64; 64]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    // rows: tmp[y][u] = sum_x B[u][x] f[y][x]
    for y in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for x in 0..8 {
                acc += BASIS[u][x] * block[y * 8 + x];
            }
            tmp[y * 8 + u] = acc;
        }
    }
    let mut out = [0.0; 64];
    for v in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for y in 0..8 {
                acc += BASIS[v][y] * tmp[y * 8 + u];
            }
            out[v * 8 + u] = acc;
        }
    }
    out
}

pub fn inverse(coeffs: &[f64; 64]) -> [f64; 64] {
    let mut tmp = [0.0; 64];
    for y in 0..8 {
        for u in 0..8 {
            let mut acc = 0.0;
            for v in 0..8 {
                acc += BASIS[v][y] * coeffs[v * 8 + u];
            }
            tmp[y * 8 + u] = acc;
        }
    }
    let mut out = [0.0; 64];
    for y in 0..8 {
        for x in 0..8 {
            let mut acc = 0.0;
            for u in 0..8 {
                acc += BASIS[u][x] * tmp[y * 8 + u];
            }
            out[y * 8 + x] = acc;
        }
    }
    out
}
