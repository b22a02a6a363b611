use super::GuidanceMap;
use crate::error::{contract, Error, Result};

fn bits_per_cell(level_count: u8) -> Result<usize> {
    match level_count {
        3 => Ok(2),
        5 => Ok(3),
        n => Err(contract!("level count must be 3 or 5, got {n}")),
    }
}

/// Packed size in bytes of a `cells`-cell map.
pub fn packed_len(cells: usize, level_count: u8) -> Result<usize> {
    Ok((cells * bits_per_cell(level_count)?).div_ceil(8))
}

/// Row-major fixed-width codes, most significant bits first.
///
/// Three-level maps use 2 bits per cell (`0 -> -1`, `1 -> 0`, `2 -> +1`,
/// `3` reserved); five-level maps use 3 bits (`code = level + 2`, codes 5..7
/// reserved). Padding bits in the last byte are zero.
pub fn pack_map(map: &GuidanceMap) -> Vec<u8> {
    let bits = bits_per_cell(map.level_count()).expect("validated map");
    let offset = if map.level_count() == 3 { 1 } else { 2 };
    let mut out = vec![0u8; packed_len(map.levels().len(), map.level_count()).expect("validated map")];
    for (i, &l) in map.levels().iter().enumerate() {
        let code = (l as i32 + offset) as u32;
        for b in 0..bits {
            if code >> (bits - 1 - b) & 1 == 1 {
                let pos = i * bits + b;
                out[pos / 8] |= 0x80 >> (pos % 8);
            }
        }
    }
    out
}

pub fn unpack_map(bytes: &[u8], rows: usize, cols: usize, level_count: u8) -> Result<GuidanceMap> {
    let bits = bits_per_cell(level_count)?;
    let cells = rows * cols;
    let expected = packed_len(cells, level_count)?;
    if bytes.len() != expected {
        return Err(Error::Format(format!("packed {rows}x{cols} map needs {expected} bytes, got {}", bytes.len())));
    }
    let bit = |pos: usize| (bytes[pos / 8] >> (7 - pos % 8)) & 1;
    let max_code = if level_count == 3 { 2 } else { 4 };
    let offset = if level_count == 3 { 1 } else { 2 };
    let mut levels = Vec::with_capacity(cells);
    for i in 0..cells {
        let code = (0..bits).fold(0u8, |acc, b| acc << 1 | bit(i * bits + b));
        if code > max_code {
            return Err(Error::Format(format!("reserved map code {code} at cell {i}")));
        }
        levels.push(code as i8 - offset);
    }
    if (cells * bits..expected * 8).any(|pos| bit(pos) != 0) {
        return Err(Error::Format("non-zero padding bits in packed map".into()));
    }
    GuidanceMap::new(rows, cols, levels, level_count).map_err(|e| Error::Format(e.to_string()))
}
