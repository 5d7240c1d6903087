//! Uniform quantization: affine, restricted-range symmetric and full-range
//! symmetric schemes.
//!
//! Rounding is half-away-from-zero everywhere (`f64::round`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_BITS: u8 = 2;
pub const MAX_BITS: u8 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Affine,
    SymmetricRestricted,
    SymmetricFull,
}

impl Scheme {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, Scheme::Affine)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Affine => "affine",
            Scheme::SymmetricRestricted => "symmetric-restricted",
            Scheme::SymmetricFull => "symmetric-full",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affine" => Ok(Scheme::Affine),
            "symmetric-restricted" => Ok(Scheme::SymmetricRestricted),
            "symmetric-full" => Ok(Scheme::SymmetricFull),
            other => Err(Error::InvalidInput(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetricVariant {
    Restricted,
    Full,
}

/// Clipping range `[beta, alpha]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipRange {
    pub beta: f64,
    pub alpha: f64,
}

impl ClipRange {
    pub fn new(beta: f64, alpha: f64) -> Result<Self> {
        if beta > alpha {
            return Err(Error::InvalidBounds {
                lo: beta,
                hi: alpha,
            });
        }
        Ok(Self { beta, alpha })
    }

    pub fn symmetric(alpha: f64) -> Self {
        Self {
            beta: -alpha,
            alpha,
        }
    }

    pub fn width(&self) -> f64 {
        self.alpha - self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformParams {
    pub scheme: Scheme,
    pub bits: u8,
    pub scale: f64,
    pub zero_point: i32,
    pub clip: ClipRange,
}

pub fn check_bits(bits: u8) -> Result<()> {
    if (MIN_BITS..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(Error::InvalidBits(bits))
    }
}

/// Inclusive code domain of `scheme` at `bits`.
pub fn code_domain(scheme: Scheme, bits: u8) -> (i32, i32) {
    let half = 1i32 << (bits - 1);
    match scheme {
        Scheme::Affine | Scheme::SymmetricFull => (-half, half - 1),
        Scheme::SymmetricRestricted => (-half + 1, half - 1),
    }
}

pub fn clip(r: f64, lo: f64, hi: f64) -> Result<f64> {
    if lo > hi {
        return Err(Error::InvalidBounds { lo, hi });
    }
    Ok(if r < lo {
        lo
    } else if r > hi {
        hi
    } else {
        r
    })
}

pub fn affine_params(range: ClipRange, bits: u8) -> Result<UniformParams> {
    check_bits(bits)?;
    if range.beta > range.alpha {
        return Err(Error::InvalidBounds {
            lo: range.beta,
            hi: range.alpha,
        });
    }
    if range.beta == range.alpha {
        return Err(Error::DegenerateRange {
            beta: range.beta,
            alpha: range.alpha,
        });
    }
    let levels = ((1u32 << bits) - 1) as f64;
    let scale = range.width() / levels;
    let zero_point = -(range.beta / scale).round() - (1i64 << (bits - 1)) as f64;
    Ok(UniformParams {
        scheme: Scheme::Affine,
        bits,
        scale,
        // saturating; ranges this lopsided are rejected by the container writer
        zero_point: zero_point as i32,
        clip: range,
    })
}

pub fn symmetric_params(alpha: f64, bits: u8, variant: SymmetricVariant) -> Result<UniformParams> {
    check_bits(bits)?;
    if alpha == 0.0 {
        return Err(Error::DegenerateRange { beta: 0.0, alpha });
    }
    if alpha < 0.0 {
        return Err(Error::InvalidBounds {
            lo: -alpha,
            hi: alpha,
        });
    }
    let (scheme, scale) = match variant {
        SymmetricVariant::Restricted => (
            Scheme::SymmetricRestricted,
            alpha / ((1i32 << (bits - 1)) - 1) as f64,
        ),
        SymmetricVariant::Full => (
            Scheme::SymmetricFull,
            2.0 * alpha / ((1u32 << bits) - 1) as f64,
        ),
    };
    Ok(UniformParams {
        scheme,
        bits,
        scale,
        zero_point: 0,
        clip: ClipRange::symmetric(alpha),
    })
}

/// Parameters for a group whose values all equal `v`: code `sign(v)` with
/// scale `|v|` reconstructs `v` exactly.
pub fn degenerate_params(v: f64, bits: u8) -> Result<UniformParams> {
    check_bits(bits)?;
    Ok(UniformParams {
        scheme: Scheme::Affine,
        bits,
        scale: if v == 0.0 { 1.0 } else { v.abs() },
        zero_point: 0,
        clip: ClipRange { beta: v, alpha: v },
    })
}

impl UniformParams {
    pub fn code_domain(&self) -> (i32, i32) {
        code_domain(self.scheme, self.bits)
    }

    pub fn is_degenerate(&self) -> bool {
        self.clip.beta == self.clip.alpha
    }

    pub fn validate(&self) -> Result<()> {
        check_bits(self.bits)?;
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        if self.scheme.is_symmetric() && self.zero_point != 0 {
            return Err(Error::InvalidInput(format!(
                "symmetric scheme with zero-point {}",
                self.zero_point
            )));
        }
        ClipRange::new(self.clip.beta, self.clip.alpha)?;
        Ok(())
    }

    pub fn quantize(&self, r: f64) -> i32 {
        let (lo, hi) = self.code_domain();
        let q = (r / self.scale + self.zero_point as f64).round();
        q.clamp(lo as f64, hi as f64) as i32
    }

    pub fn dequantize(&self, code: i32) -> Result<f64> {
        let (lo, hi) = self.code_domain();
        if code < lo || code > hi {
            return Err(Error::CodeOutOfDomain { code, lo, hi });
        }
        Ok(match self.scheme {
            Scheme::Affine => (code as f64 - self.zero_point as f64) * self.scale,
            Scheme::SymmetricRestricted | Scheme::SymmetricFull => code as f64 * self.scale,
        })
    }
}

pub fn uniform_quantize(r: f64, params: &UniformParams) -> i32 {
    params.quantize(r)
}

pub fn uniform_dequantize(code: i32, params: &UniformParams) -> Result<f64> {
    params.dequantize(code)
}

/// Derives the clip range from the data and quantizes every element.
///
/// Groups whose values are all equal fall back to [`degenerate_params`]
/// regardless of `scheme`.
pub fn quantize_slice(
    values: &[f64],
    scheme: Scheme,
    bits: u8,
) -> Result<(UniformParams, Vec<i32>)> {
    check_bits(bits)?;
    let first = *values.first().ok_or(Error::EmptySlice)?;
    let (min, max) = values
        .iter()
        .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let params = if min == max {
        degenerate_params(min, bits)?
    } else {
        match scheme {
            Scheme::Affine => affine_params(
                ClipRange {
                    beta: min,
                    alpha: max,
                },
                bits,
            )?,
            Scheme::SymmetricRestricted | Scheme::SymmetricFull => {
                let alpha = min.abs().max(max.abs());
                let variant = if scheme == Scheme::SymmetricRestricted {
                    SymmetricVariant::Restricted
                } else {
                    SymmetricVariant::Full
                };
                symmetric_params(alpha, bits, variant)?
            }
        }
    };
    let codes = values.iter().map(|&v| params.quantize(v)).collect();
    Ok((params, codes))
}
