//! Distortion and rate metrics.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::image::RgbImage;

/// Mean squared error over all pixels and channels.
pub fn mse(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(contract!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        ));
    }
    let sum: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    Ok(sum as f64 / a.data().len() as f64)
}

/// Peak signal-to-noise ratio in dB for 8-bit data; `f64::INFINITY` for identical images.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 { f64::INFINITY } else { 10.0 * (255.0 * 255.0 / m).log10() })
}

/// Bits per pixel of a `bytes`-long stream for a `width x height` image.
pub fn bpp(bytes: usize, width: usize, height: usize) -> Result<f64> {
    if width == 0 || height == 0 {
        return Err(contract!("bpp of an empty image"));
    }
    Ok(bytes as f64 * 8.0 / (width * height) as f64)
}

/// One rate-distortion sample; serialised as the CSV row `preset,bpp,psnr`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub preset: u8,
    pub bpp: f64,
    #[serde(rename = "psnr")]
    pub quality: f64,
}

pub fn write_rd_csv<W: Write>(points: &[RdPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rd_csv<R: Read>(input: R) -> Result<Vec<RdPoint>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("rd csv: {e}"))
}

/// Bjontegaard delta rate of `test` against `anchor`, in percent.
///
/// `log10(rate)` is fitted as a cubic least-squares polynomial of quality on
/// each curve, both are integrated over the overlapping quality interval and
/// the mean log difference `d` is reported as `100 * (10^d - 1)`. Quality is
/// mapped onto `[-1, 1]` over the overlap before fitting.
pub fn bd_rate(anchor: &[RdPoint], test: &[RdPoint]) -> Result<f64> {
    let lo_hi = |pts: &[RdPoint]| -> Result<(f64, f64)> {
        if pts.len() < 4 {
            return Err(contract!("bd_rate needs at least 4 points per curve, got {}", pts.len()));
        }
        for p in pts {
            if !(p.bpp > 0.0 && p.bpp.is_finite() && p.quality.is_finite()) {
                return Err(contract!("bd_rate needs positive rates and finite quality, got {p:?}"));
            }
        }
        let lo = pts.iter().map(|p| p.quality).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(|p| p.quality).fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    };
    let (alo, ahi) = lo_hi(anchor)?;
    let (tlo, thi) = lo_hi(test)?;
    let (lo, hi) = (alo.max(tlo), ahi.min(thi));
    if hi <= lo {
        return Err(contract!("quality ranges do not overlap"));
    }
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fit = |pts: &[RdPoint]| -> Result<[f64; 4]> {
        let a = DMatrix::from_fn(pts.len(), 4, |r, c| ((pts[r].quality - center) / half).powi(c as i32));
        let b = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.bpp.log10()));
        let x = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::Numeric(format!("bd_rate fit: {e}")))?;
        Ok([x[0], x[1], x[2], x[3]])
    };
    // Mean over t in [-1, 1] of c0 + c1 t + c2 t^2 + c3 t^3.
    let mean = |c: [f64; 4]| c[0] + c[2] / 3.0;
    let d = mean(fit(test)?) - mean(fit(anchor)?);
    let out = 100.0 * (10f64.powf(d) - 1.0);
    if !out.is_finite() {
        return Err(Error::Numeric("bd_rate overflow".into()));
    }
    Ok(out)
}
