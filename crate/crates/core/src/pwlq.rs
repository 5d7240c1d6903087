//! Piece-wise linear quantization (PWLQ).
//!
//! The range `[-m, m]` is split at a breakpoint `p` into a closed center
//! `[-p, p]`, quantized with k-bit full-range symmetric quantization, and two
//! tails `[-m, -p)` and `(p, m]`, each quantized with (k-1)-bit affine
//! quantization over its own range.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uniform::{
    affine_params, check_bits, symmetric_params, ClipRange, SymmetricVariant, UniformParams,
};

pub const MIN_PWLQ_BITS: u8 = 3;
pub const DEFAULT_GRID_POINTS: usize = 64;

const RATIO_MIN: f64 = 0.05;
const RATIO_MAX: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PwlqParams {
    pub bits: u8,
    pub m: f64,
    pub p: f64,
    pub center: UniformParams,
    pub neg_tail: UniformParams,
    pub pos_tail: UniformParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Center,
    Tail,
}

/// One encoded element: a k-bit center code, or a tail-sign bit plus a
/// (k-1)-bit affine code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PwlqCode {
    Center(i32),
    Tail { negative: bool, code: i32 },
}

impl PwlqCode {
    pub fn region(&self) -> Region {
        match self {
            PwlqCode::Center(_) => Region::Center,
            PwlqCode::Tail { .. } => Region::Tail,
        }
    }

    /// Flattens to a region flag plus a signed k-bit value. Tail codes put the
    /// sign in the top bit and the biased (k-1)-bit code below it.
    pub fn to_packed(self, bits: u8) -> (bool, i32) {
        let half = 1i32 << (bits - 1);
        match self {
            PwlqCode::Center(c) => (false, c),
            PwlqCode::Tail { negative, code } => {
                let biased = code + (half >> 1);
                let unsigned = ((negative as i32) << (bits - 1)) | biased;
                (true, unsigned - half)
            }
        }
    }

    pub fn from_packed(bits: u8, tail: bool, value: i32) -> Self {
        if !tail {
            return PwlqCode::Center(value);
        }
        let half = 1i32 << (bits - 1);
        let unsigned = value + half;
        PwlqCode::Tail {
            negative: (unsigned >> (bits - 1)) & 1 == 1,
            code: (unsigned & (half - 1)) - (half >> 1),
        }
    }
}

impl PwlqParams {
    pub fn new(bits: u8, m: f64, p: f64) -> Result<Self> {
        check_bits(bits)?;
        if bits < MIN_PWLQ_BITS {
            return Err(Error::BitsTooSmall(bits));
        }
        if !(p > 0.0 && p < m) {
            return Err(Error::BreakpointOutOfRange { p, m });
        }
        Ok(Self {
            bits,
            m,
            p,
            center: symmetric_params(p, bits, SymmetricVariant::Full)?,
            neg_tail: affine_params(
                ClipRange {
                    beta: -m,
                    alpha: -p,
                },
                bits - 1,
            )?,
            pos_tail: affine_params(ClipRange { beta: p, alpha: m }, bits - 1)?,
        })
    }

    pub fn region_of(&self, r: f64) -> Region {
        if r.abs() <= self.p {
            Region::Center
        } else {
            Region::Tail
        }
    }

    pub fn encode(&self, r: f64) -> PwlqCode {
        if r.abs() <= self.p {
            PwlqCode::Center(self.center.quantize(r))
        } else if r < 0.0 {
            PwlqCode::Tail {
                negative: true,
                code: self.neg_tail.quantize(r),
            }
        } else {
            PwlqCode::Tail {
                negative: false,
                code: self.pos_tail.quantize(r),
            }
        }
    }

    pub fn decode(&self, code: PwlqCode) -> Result<f64> {
        match code {
            PwlqCode::Center(c) => self.center.dequantize(c),
            PwlqCode::Tail {
                negative: true,
                code,
            } => self.neg_tail.dequantize(code),
            PwlqCode::Tail {
                negative: false,
                code,
            } => self.pos_tail.dequantize(code),
        }
    }

    /// Step size of the piece that `code` belongs to.
    pub fn piece_scale(&self, region: Region) -> f64 {
        match region {
            Region::Center => self.center.scale,
            Region::Tail => self.pos_tail.scale,
        }
    }
}

fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

/// Closed-form breakpoint for data with unit standard deviation:
/// `p = ln(0.8614 m + 0.6079)`, with `p / m` clamped to `[0.05, 0.95]`.
pub fn breakpoint_approx(m: f64) -> Result<f64> {
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::NonPositiveM(m));
    }
    let ratio = ((0.8614 * m + 0.6079).ln() / m).clamp(RATIO_MIN, RATIO_MAX);
    Ok(m * ratio)
}

/// [`breakpoint_approx`] for data with standard deviation `sigma`: the range
/// is measured in units of `sigma` and the breakpoint scaled back.
pub fn breakpoint_approx_scaled(m: f64, sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::NonPositiveM(sigma));
    }
    Ok(sigma * breakpoint_approx(m / sigma)?)
}

/// Closed-form breakpoint for a group, using its max magnitude and its RMS
/// (weights are taken as zero-centered).
pub fn breakpoint_for_values(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySlice);
    }
    let m = max_abs(values);
    if m == 0.0 {
        return Err(Error::AllZeroSlice);
    }
    breakpoint_approx_scaled(m, rms(values))
}

/// Mean squared reconstruction error of PWLQ at breakpoint `p`.
pub fn pwlq_mse(values: &[f64], bits: u8, p: f64) -> Result<f64> {
    let params = PwlqParams::new(bits, max_abs(values), p)?;
    let mut sse = 0.0;
    for &r in values {
        let d = params.decode(params.encode(r))? - r;
        sse += d * d;
    }
    Ok(sse / values.len() as f64)
}

/// Candidate breakpoints searched by [`breakpoint_bruteforce`]: `grid_points`
/// uniform interior ratios of `(0, 1)` plus the closed-form estimate, sorted
/// ascending.
pub fn breakpoint_candidates(values: &[f64], grid_points: usize) -> Result<Vec<f64>> {
    if grid_points < 3 {
        return Err(Error::GridTooSmall(grid_points));
    }
    let approx = breakpoint_for_values(values)?;
    let m = max_abs(values);
    let mut out: Vec<f64> = (1..=grid_points)
        .map(|i| m * i as f64 / (grid_points + 1) as f64)
        .collect();
    out.push(approx);
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Exhaustive breakpoint search minimizing reconstruction MSE. Ties go to the
/// smaller breakpoint. Candidates are evaluated in parallel; the reduction is
/// an ordered argmin, so the result matches a sequential scan.
pub fn breakpoint_bruteforce(values: &[f64], bits: u8, grid_points: usize) -> Result<f64> {
    check_bits(bits)?;
    if bits < MIN_PWLQ_BITS {
        return Err(Error::BitsTooSmall(bits));
    }
    let candidates = breakpoint_candidates(values, grid_points)?;
    let scored = candidates
        .par_iter()
        .map(|&p| pwlq_mse(values, bits, p).map(|mse| (p, mse)))
        .collect::<Result<Vec<_>>>()?;
    let mut best = scored[0];
    for &(p, mse) in &scored[1..] {
        if mse < best.1 {
            best = (p, mse);
        }
    }
    Ok(best.0)
}

pub fn pwlq_quantize(values: &[f64], bits: u8, p: f64) -> Result<(PwlqParams, Vec<PwlqCode>)> {
    check_bits(bits)?;
    if bits < MIN_PWLQ_BITS {
        return Err(Error::BitsTooSmall(bits));
    }
    if values.is_empty() {
        return Err(Error::EmptySlice);
    }
    let params = PwlqParams::new(bits, max_abs(values), p)?;
    let codes = values.iter().map(|&r| params.encode(r)).collect();
    Ok((params, codes))
}

pub fn pwlq_dequantize(codes: &[PwlqCode], params: &PwlqParams) -> Result<Vec<f64>> {
    codes.iter().map(|&c| params.decode(c)).collect()
}
