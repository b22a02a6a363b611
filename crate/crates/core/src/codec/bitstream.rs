//! `CTAM` stream container.
//!
//! ```text
//! "CTAM" | version u8 | flags u8 | width u16 | height u16 | preset u8 |
//! gamma_code u8 | map_rows u8 | map_cols u8 | packed map | payload_len u32 | payload
//! ```
//!
//! Integers are little-endian. Flag bit 0 marks a guidance map, bit 1 a
//! five-level map; other bits must be zero. Without a map both map
//! dimensions are zero and the packed section is empty.

use super::{Gamma, Preset};
use crate::error::{Error, Result};
use crate::guidance::{pack_map, packed_len, unpack_map, GuidanceMap};

pub const MAGIC: &[u8; 4] = b"CTAM";
pub const VERSION: u8 = 1;
const FLAG_GUIDANCE: u8 = 1;
const FLAG_FIVE_LEVEL: u8 = 2;
/// Bytes before the packed map.
pub const FIXED_HEADER_LEN: usize = 4 + 1 + 1 + 2 + 2 + 1 + 1 + 1 + 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Header {
    pub width: u16,
    pub height: u16,
    pub preset: Preset,
    pub gamma: Gamma,
}

/// A parsed stream borrowing its payload.
#[derive(Debug)]
pub struct Parsed<'a> {
    pub header: Header,
    pub guidance: Option<GuidanceMap>,
    pub payload: &'a [u8],
    /// Offset of `payload` within the whole stream.
    pub payload_offset: usize,
}

pub fn write(header: &Header, guidance: Option<&GuidanceMap>, payload: &[u8]) -> Result<Vec<u8>> {
    let (flags, rows, cols, packed) = match guidance {
        None => (0, 0, 0, Vec::new()),
        Some(m) => {
            let dim = |n: usize, what: &str| {
                u8::try_from(n).map_err(|_| Error::Format(format!("guidance {what} {n} exceeds 255")))
            };
            let five = if m.level_count() == 5 { FLAG_FIVE_LEVEL } else { 0 };
            (FLAG_GUIDANCE | five, dim(m.rows(), "rows")?, dim(m.cols(), "cols")?, pack_map(m))
        }
    };
    let len = u32::try_from(payload.len()).map_err(|_| Error::Format("payload exceeds 4 GiB".into()))?;
    let mut out = Vec::with_capacity(FIXED_HEADER_LEN + packed.len() + 4 + payload.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(flags);
    out.extend_from_slice(&header.width.to_le_bytes());
    out.extend_from_slice(&header.height.to_le_bytes());
    out.push(header.preset.index());
    out.push(header.gamma.code());
    out.push(rows);
    out.push(cols);
    out.extend_from_slice(&packed);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Corrupt { offset: self.bytes.len(), msg: format!("truncated {what}") });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }
}

pub fn parse(bytes: &[u8]) -> Result<Parsed<'_>> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Format("bad magic, expected CTAM".into()));
    }
    let version = c.u8("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported stream version {version}")));
    }
    let flags = c.u8("flags")?;
    if flags & !(FLAG_GUIDANCE | FLAG_FIVE_LEVEL) != 0 {
        return Err(Error::Format(format!("reserved flag bits set: {flags:#04x}")));
    }
    let width = c.u16("width")?;
    let height = c.u16("height")?;
    if width < 8 || height < 8 {
        return Err(Error::Format(format!("image {width}x{height} smaller than one block")));
    }
    let preset = Preset::new(c.u8("preset")?).map_err(|e| Error::Format(e.to_string()))?;
    let gamma = Gamma::from_code(c.u8("gamma")?)?;
    let rows = usize::from(c.u8("map rows")?);
    let cols = usize::from(c.u8("map cols")?);
    let guidance = if flags & FLAG_GUIDANCE != 0 {
        if rows == 0 || cols == 0 {
            return Err(Error::Format("guidance flag set with an empty map".into()));
        }
        let levels = if flags & FLAG_FIVE_LEVEL != 0 { 5 } else { 3 };
        let n = packed_len(rows * cols, levels)?;
        Some(unpack_map(c.take(n, "guidance map")?, rows, cols, levels)?)
    } else {
        if flags != 0 || rows != 0 || cols != 0 {
            return Err(Error::Format("map fields set without the guidance flag".into()));
        }
        None
    };
    let len = c.take(4, "payload length")?;
    let len = u32::from_le_bytes([len[0], len[1], len[2], len[3]]) as usize;
    let payload_offset = c.pos;
    let payload = c.take(len, "payload")?;
    if c.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes after payload", bytes.len() - c.pos)));
    }
    Ok(Parsed { header: Header { width, height, preset, gamma }, guidance, payload, payload_offset })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Header {
        Header { width: 336, height: 336, preset: Preset::new(6).unwrap(), gamma: Gamma::new(2.0).unwrap() }
    }

    #[test]
    fn layout_without_map() {
        let bytes = write(&header(), None, &[7, 8, 9]).unwrap();
        assert_eq!(
            bytes,
            [b'C', b'T', b'A', b'M', 1, 0, 0x50, 1, 0x50, 1, 6, 32, 0, 0, 3, 0, 0, 0, 7, 8, 9]
        );
        let p = parse(&bytes).unwrap();
        assert_eq!(p.header, header());
        assert!(p.guidance.is_none());
        assert_eq!(p.payload, &[7, 8, 9]);
        assert_eq!(p.payload_offset, FIXED_HEADER_LEN + 4);
    }

    #[test]
    fn eight_by_eight_map_section_is_sixteen_bytes() {
        let m = GuidanceMap::base(8, 8).unwrap();
        let with = write(&header(), Some(&m), &[]).unwrap();
        let without = write(&header(), None, &[]).unwrap();
        assert_eq!(with.len() - without.len(), 16);
        assert_eq!(parse(&with).unwrap().guidance.unwrap(), m);
    }

    #[test]
    fn rejects_malformed_headers() {
        let good = write(&header(), None, &[1]).unwrap();
        let mutate = |i: usize, v: u8| {
            let mut b = good.clone();
            b[i] = v;
            parse(&b).unwrap_err()
        };
        assert!(matches!(mutate(0, b'X'), Error::Format(_)));
        assert!(matches!(mutate(4, 2), Error::Format(_)));
        assert!(matches!(mutate(5, 4), Error::Format(_)));
        assert!(matches!(mutate(5, 2), Error::Format(_)));
        assert!(matches!(mutate(10, 10), Error::Format(_)));
        assert!(matches!(mutate(11, 200), Error::Format(_)));
        assert!(matches!(mutate(12, 1), Error::Format(_)));
        assert!(matches!(parse(&good[..good.len() - 1]).unwrap_err(), Error::Corrupt { .. }));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(parse(&long).unwrap_err(), Error::Format(_)));
    }

    #[test]
    fn oversized_map_dims_are_format_errors() {
        let m = GuidanceMap::base(256, 1).unwrap();
        assert!(matches!(write(&header(), Some(&m), &[]).unwrap_err(), Error::Format(_)));
    }
}
