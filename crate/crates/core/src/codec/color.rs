//! BT.601 full-range colour conversion with zero-centred planes.

/// `[Y - 128, Cb - 128, Cr - 128]` for 8-bit RGB.
pub fn rgb_to_ycbcr(r: f64, g: f64, b: f64) -> [f64; 3] {
    [
        0.299 * r + 0.587 * g + 0.114 * b - 128.0,
        -0.168736 * r - 0.331264 * g + 0.5 * b,
        0.5 * r - 0.418688 * g - 0.081312 * b,
    ]
}

/// Exact inverse of [`rgb_to_ycbcr`]'s matrix.
pub fn ycbcr_to_rgb(y: f64, cb: f64, cr: f64) -> [f64; 3] {
    let y = y + 128.0;
    [
        y - 1.2188941887143166e-06 * cb + 1.4019995886573404 * cr,
        y - 0.3441356781653367 * cb - 0.7141361555818125 * cr,
        y + 1.7720000660738162 * cb + 4.0629806287575455e-07 * cr,
    ]
}

/// Clamp to `[0, 255]` and round half away from zero.
pub fn to_u8(v: f64) -> u8 {
    v.clamp(0.0, 255.0).round() as u8
}
