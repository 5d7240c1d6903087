//! Sub-byte packing of signed k-bit codes.
//!
//! Each code is biased to unsigned (`code + 2^(k-1)`) and code `i` occupies
//! bits `[i*k, (i+1)*k)` of the stream, counting from bit 0 (LSB) of byte 0.
//! Unused trailing bits of the last byte are zero.

use crate::error::{Error, Result};
use crate::uniform::check_bits;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedCodes {
    pub bits: u8,
    pub count: usize,
    pub data: Vec<u8>,
}

pub fn packed_len(count: usize, bits: u8) -> usize {
    (count * bits as usize).div_ceil(8)
}

fn write_fields(values: impl ExactSizeIterator<Item = u32>, bits: u8) -> Vec<u8> {
    let mut out = vec![0u8; packed_len(values.len(), bits)];
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    let mut pos = 0;
    for v in values {
        acc |= (v as u64) << filled;
        filled += bits as u32;
        while filled >= 8 {
            out[pos] = acc as u8;
            pos += 1;
            acc >>= 8;
            filled -= 8;
        }
    }
    if filled > 0 {
        out[pos] = acc as u8;
    }
    out
}

fn read_fields(data: &[u8], count: usize, bits: u8) -> Vec<u32> {
    let mask = (1u64 << bits) - 1;
    let mut out = Vec::with_capacity(count);
    let mut acc: u64 = 0;
    let mut filled = 0u32;
    let mut bytes = data.iter();
    for _ in 0..count {
        while filled < bits as u32 {
            acc |= (*bytes.next().expect("length checked by caller") as u64) << filled;
            filled += 8;
        }
        out.push((acc & mask) as u32);
        acc >>= bits;
        filled -= bits as u32;
    }
    out
}

pub fn pack_codes(codes: &[i32], bits: u8) -> Result<PackedCodes> {
    check_bits(bits)?;
    let half = 1i32 << (bits - 1);
    if let Some(&code) = codes.iter().find(|&&c| c < -half || c >= half) {
        return Err(Error::CodeOutOfDomain {
            code,
            lo: -half,
            hi: half - 1,
        });
    }
    Ok(PackedCodes {
        bits,
        count: codes.len(),
        data: write_fields(codes.iter().map(|&c| (c + half) as u32), bits),
    })
}

pub fn unpack_codes(p: &PackedCodes) -> Result<Vec<i32>> {
    check_bits(p.bits)?;
    let needed = packed_len(p.count, p.bits);
    if p.data.len() < needed {
        return Err(Error::TruncatedData {
            needed,
            available: p.data.len(),
        });
    }
    let half = 1i32 << (p.bits - 1);
    Ok(read_fields(&p.data, p.count, p.bits)
        .into_iter()
        .map(|u| u as i32 - half)
        .collect())
}

/// One bit per flag, same bit order as [`pack_codes`].
pub fn pack_bits(flags: &[bool]) -> Vec<u8> {
    write_fields(flags.iter().map(|&b| b as u32), 1)
}

pub fn unpack_bits(data: &[u8], count: usize) -> Result<Vec<bool>> {
    let needed = count.div_ceil(8);
    if data.len() < needed {
        return Err(Error::TruncatedData {
            needed,
            available: data.len(),
        });
    }
    Ok(read_fields(data, count, 1)
        .into_iter()
        .map(|b| b == 1)
        .collect())
}
