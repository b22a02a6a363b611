//! Binary PPM (`P6`, maxval 255).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::RgbImage;

pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    decode(&fs::read(path)?)
}

pub fn write_ppm(image: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(image))?;
    Ok(())
}

pub fn encode(image: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.extend_from_slice(image.data());
    out
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        let digits = &self.bytes[start..self.pos];
        if digits.is_empty() || digits.len() > 9 {
            return Err(Error::Corrupt { offset: start, msg: format!("bad {what} in PPM header") });
        }
        Ok(std::str::from_utf8(digits).expect("ascii digits").parse().expect("at most 9 digits"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<RgbImage> {
    match bytes.get(..2) {
        Some(b"P6") => {}
        Some([b'P', d]) if d.is_ascii_digit() => {
            return Err(Error::Unsupported(format!("PPM variant P{}; only P6 is read", *d as char)))
        }
        _ => return Err(Error::Format("missing P6 magic".into())),
    }
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Unsupported(format!("PPM maxval {maxval}; only 255 is read")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("empty PPM image {width}x{height}")));
    }
    match bytes.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(Error::Corrupt { offset: h.pos, msg: "expected whitespace after maxval".into() }),
    }
    let need = width * height * 3;
    let pixels = &bytes[h.pos..];
    if pixels.len() < need {
        return Err(Error::Corrupt {
            offset: bytes.len(),
            msg: format!("pixel data truncated: {} of {need} bytes", pixels.len()),
        });
    }
    RgbImage::new(width, height, pixels[..need].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_white_pixel_layout() {
        let img = RgbImage::filled(1, 1, [255, 255, 255]);
        let bytes = encode(&img);
        assert_eq!(bytes, b"P6\n1 1\n255\n\xff\xff\xff");
        assert_eq!(decode(&bytes).unwrap(), img);
    }

    #[test]
    fn header_comments_are_skipped() {
        let bytes = b"P6 # made by hand\n2 1\n255\n\x01\x02\x03\x04\x05\x06";
        let img = decode(bytes).unwrap();
        assert_eq!(img.pixel(1, 0), [4, 5, 6]);
    }

    #[test]
    fn rejects_other_variants() {
        assert_eq!(decode(b"P5\n1 1\n255\n\x00").unwrap_err().code(), "unsupported");
        assert_eq!(decode(b"P3\n1 1\n255\n0 0 0").unwrap_err().code(), "unsupported");
        assert_eq!(decode(b"P6\n1 1\n65535\n\0\0\0\0\0\0").unwrap_err().code(), "unsupported");
        assert_eq!(decode(b"GIF89a").unwrap_err().code(), "format");
    }

    #[test]
    fn truncated_pixels_are_corrupt() {
        let err = decode(b"P6\n2 2\n255\n\x00\x00\x00").unwrap_err();
        assert_eq!(err.code(), "corrupt");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ppm");
        let img = RgbImage::from_fn(5, 3, |x, y| [x as u8 * 40, y as u8 * 70, 9]);
        write_ppm(&img, &path).unwrap();
        let raw = fs::read(&path).unwrap();
        assert_eq!(read_ppm(&path).unwrap(), img);
        write_ppm(&read_ppm(&path).unwrap(), &path).unwrap();
        assert_eq!(fs::read(&path).unwrap(), raw);
    }
}
