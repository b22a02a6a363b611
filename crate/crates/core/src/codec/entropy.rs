//! Context modelling of quantized 8x8 blocks on top of the range coder.
//!
//! Each block is coded per channel as 64 zigzag symbols. The DC symbol is the
//! difference to the previous block's DC in the same channel. Every symbol
//! gets a significance flag; non-zero symbols add a bypass sign and the
//! magnitude minus one as an order-0 Exp-Golomb code (adaptive prefix bins,
//! bypass suffix).

use super::range_coder::{Prob, RangeDecoder, RangeEncoder};
use crate::error::{Error, Result};

/// Largest quantized magnitude a stream may carry.
pub const MAX_SYMBOL: i32 = 1 << 24;
/// Longest Exp-Golomb prefix the decoder accepts (DC differences reach `2 * MAX_SYMBOL`).
pub const MAX_PREFIX: usize = 25;
const PREFIX_CTX: usize = 8;

/// `0` for DC, `1` for zigzag positions 1..=9, `2` for the rest.
pub fn band(zz: usize) -> usize {
    match zz {
        0 => 0,
        1..=9 => 1,
        _ => 2,
    }
}

#[derive(Clone, Debug)]
struct Contexts {
    sig: [[[Prob; 3]; 3]; 3],
    prefix: [[[Prob; PREFIX_CTX]; 3]; 3],
}

impl Default for Contexts {
    fn default() -> Self {
        Contexts { sig: [[[Prob::default(); 3]; 3]; 3], prefix: [[[Prob::default(); PREFIX_CTX]; 3]; 3] }
    }
}

/// Per-stream state shared by both directions.
#[derive(Clone, Debug, Default)]
struct State {
    ctx: Contexts,
    prev_dc: [i32; 3],
    prev_dc_nonzero: [bool; 3],
}

impl State {
    fn history(&self, ch: usize, zz: usize, coded: &[i32; 64]) -> usize {
        match zz {
            0 => usize::from(self.prev_dc_nonzero[ch]),
            1 => usize::from(coded[0] != 0),
            _ => usize::from(coded[zz - 1] != 0) + usize::from(coded[zz - 2] != 0),
        }
    }
}

pub struct BlockEncoder {
    rc: RangeEncoder,
    state: State,
}

impl Default for BlockEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl BlockEncoder {
    pub fn new() -> Self {
        BlockEncoder { rc: RangeEncoder::new(), state: State::default() }
    }

    /// Codes one channel of one block given in zigzag order. Returns the ideal
    /// code length in bits. Symbols must satisfy `|v| <= MAX_SYMBOL`.
    pub fn encode_block(&mut self, ch: usize, zigzag: &[i32; 64]) -> f64 {
        debug_assert!(zigzag.iter().all(|v| v.unsigned_abs() <= MAX_SYMBOL as u32));
        let mut coded = *zigzag;
        coded[0] = zigzag[0] - self.state.prev_dc[ch];
        let mut bits = 0.0;
        for zz in 0..64 {
            let v = coded[zz];
            let b = band(zz);
            let h = self.state.history(ch, zz, &coded);
            let sig = &mut self.state.ctx.sig[ch][b][h];
            bits += sig.cost(v != 0);
            self.rc.encode(sig, v != 0);
            if v == 0 {
                continue;
            }
            self.rc.encode_bypass(v < 0);
            bits += 1.0;
            let m = u64::from(v.unsigned_abs());
            // EG0 of m - 1: prefix k = floor(log2(m)), then k low bits of m.
            let k = 63 - m.leading_zeros() as usize;
            for i in 0..=k {
                let p = &mut self.state.ctx.prefix[ch][b][i.min(PREFIX_CTX - 1)];
                let bit = i < k;
                bits += p.cost(bit);
                self.rc.encode(p, bit);
            }
            for i in (0..k).rev() {
                self.rc.encode_bypass((m >> i) & 1 == 1);
            }
            bits += k as f64;
        }
        self.state.prev_dc[ch] = zigzag[0];
        self.state.prev_dc_nonzero[ch] = coded[0] != 0;
        bits
    }

    pub fn finish(self) -> Vec<u8> {
        self.rc.finish()
    }
}

pub struct BlockDecoder<'a> {
    rc: RangeDecoder<'a>,
    state: State,
    base_offset: usize,
}

impl<'a> BlockDecoder<'a> {
    pub fn new(payload: &'a [u8], base_offset: usize) -> Result<Self> {
        Ok(BlockDecoder { rc: RangeDecoder::new(payload, base_offset)?, state: State::default(), base_offset })
    }

    fn corrupt(&self, msg: &str) -> Error {
        Error::Corrupt { offset: self.base_offset + self.rc.position(), msg: msg.to_string() }
    }

    pub fn decode_block(&mut self, ch: usize) -> Result<[i32; 64]> {
        let mut coded = [0i32; 64];
        for zz in 0..64 {
            let b = band(zz);
            let h = self.state.history(ch, zz, &coded);
            if !self.rc.decode(&mut self.state.ctx.sig[ch][b][h])? {
                continue;
            }
            let negative = self.rc.decode_bypass()?;
            let mut k = 0;
            while self.rc.decode(&mut self.state.ctx.prefix[ch][b][k.min(PREFIX_CTX - 1)])? {
                k += 1;
                if k > MAX_PREFIX {
                    return Err(self.corrupt("Exp-Golomb prefix too long"));
                }
            }
            let mut m: u64 = 1;
            for _ in 0..k {
                m = (m << 1) | u64::from(self.rc.decode_bypass()?);
            }
            let limit = if zz == 0 { 2 * MAX_SYMBOL } else { MAX_SYMBOL };
            let m = i32::try_from(m).ok().filter(|&m| m <= limit).ok_or_else(|| self.corrupt("symbol out of range"))?;
            coded[zz] = if negative { -m } else { m };
        }
        let mut out = coded;
        out[0] = self.state.prev_dc[ch] + coded[0];
        if out[0].abs() > MAX_SYMBOL {
            return Err(self.corrupt("DC out of range"));
        }
        self.state.prev_dc[ch] = out[0];
        self.state.prev_dc_nonzero[ch] = coded[0] != 0;
        Ok(out)
    }

    /// Errors unless every payload byte was consumed.
    pub fn finish(self) -> Result<()> {
        if self.rc.is_exhausted() {
            Ok(())
        } else {
            Err(self.corrupt("trailing bytes after payload"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bands() {
        assert_eq!((band(0), band(1), band(9), band(10), band(63)), (0, 1, 1, 2, 2));
    }

    #[test]
    fn blocks_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let blocks: Vec<(usize, [i32; 64])> = (0..300)
            .map(|i| {
                let mut b = [0i32; 64];
                for (zz, v) in b.iter_mut().enumerate() {
                    if rng.random_bool(0.8 / (1.0 + zz as f64 * 0.3)) {
                        *v = rng.random_range(-300..=300);
                    }
                }
                if i == 5 {
                    b[0] = MAX_SYMBOL;
                    b[1] = -MAX_SYMBOL;
                }
                if i == 8 {
                    b[0] = -MAX_SYMBOL;
                }
                (i % 3, b)
            })
            .collect();
        let mut enc = BlockEncoder::new();
        let bits: f64 = blocks.iter().map(|(c, b)| enc.encode_block(*c, b)).sum();
        let bytes = enc.finish();
        assert!((bytes.len() as f64 * 8.0 - bits).abs() < 64.0 + 0.01 * bits);
        let mut dec = BlockDecoder::new(&bytes, 0).unwrap();
        for (c, b) in &blocks {
            assert_eq!(&dec.decode_block(*c).unwrap(), b);
        }
        dec.finish().unwrap();
    }

    #[test]
    fn zero_blocks_are_cheap() {
        let mut enc = BlockEncoder::new();
        for i in 0..300 {
            enc.encode_block(i % 3, &[0; 64]);
        }
        assert!(enc.finish().len() < 80);
    }
}
