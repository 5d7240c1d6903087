//! Grouping of 4-D weight tensors and group-wise quantization.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pwlq::{
    breakpoint_bruteforce, breakpoint_for_values, pwlq_quantize, PwlqCode, PwlqParams,
    DEFAULT_GRID_POINTS, MIN_PWLQ_BITS,
};
use crate::tensor::{DType, TensorShape, WeightTensor};
use crate::uniform::{check_bits, degenerate_params, quantize_slice, Scheme, UniformParams};

/// Which weights share one set of quantization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    LayerWise,
    FilterWise,
    ChannelWise,
    FShapeWise,
    CShapeWise,
}

impl Granularity {
    pub const ALL: [Granularity; 5] = [
        Granularity::LayerWise,
        Granularity::FilterWise,
        Granularity::ChannelWise,
        Granularity::FShapeWise,
        Granularity::CShapeWise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::LayerWise => "layer-wise",
            Granularity::FilterWise => "filter-wise",
            Granularity::ChannelWise => "channel-wise",
            Granularity::FShapeWise => "f-shape-wise",
            Granularity::CShapeWise => "c-shape-wise",
        }
    }

    pub fn group_count(self, shape: &TensorShape) -> usize {
        let TensorShape { n, c, h, w } = *shape;
        match self {
            Granularity::LayerWise => 1,
            Granularity::FilterWise => n,
            Granularity::ChannelWise => n * c,
            Granularity::FShapeWise => c * h * w,
            Granularity::CShapeWise => n * h * w,
        }
    }

    /// True when this granularity leaves a tensor of `shape` unquantized
    /// (channel-wise on 1x1 kernels).
    pub fn is_passthrough_for(self, shape: &TensorShape) -> bool {
        self == Granularity::ChannelWise && shape.kernel_area() == 1
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "layer-wise" | "layer" => Ok(Granularity::LayerWise),
            "filter-wise" | "filter" => Ok(Granularity::FilterWise),
            "channel-wise" | "channel" => Ok(Granularity::ChannelWise),
            "f-shape-wise" | "fshape" => Ok(Granularity::FShapeWise),
            "c-shape-wise" | "cshape" => Ok(Granularity::CShapeWise),
            other => Err(Error::InvalidInput(format!(
                "unknown granularity `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Affine,
    SymmetricRestricted,
    SymmetricFull,
    Pwlq,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Affine => "affine",
            Method::SymmetricRestricted => "symmetric-restricted",
            Method::SymmetricFull => "symmetric-full",
            Method::Pwlq => "pwlq",
        }
    }

    pub fn uniform_scheme(self) -> Option<Scheme> {
        match self {
            Method::Affine => Some(Scheme::Affine),
            Method::SymmetricRestricted => Some(Scheme::SymmetricRestricted),
            Method::SymmetricFull => Some(Scheme::SymmetricFull),
            Method::Pwlq => None,
        }
    }

    pub fn check_bits(self, bits: u8) -> Result<()> {
        let min = if self == Method::Pwlq {
            MIN_PWLQ_BITS
        } else {
            2
        };
        if check_bits(bits).is_err() || bits < min {
            return Err(Error::IncompatibleBits {
                method: self.as_str().to_owned(),
                bits,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affine" => Ok(Method::Affine),
            "symmetric-restricted" | "sym-restricted" => Ok(Method::SymmetricRestricted),
            "symmetric-full" | "sym-full" => Ok(Method::SymmetricFull),
            "pwlq" => Ok(Method::Pwlq),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

/// How PWLQ picks its breakpoint per group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BreakpointMode {
    #[default]
    Approx,
    Bruteforce {
        grid_points: usize,
    },
}

impl BreakpointMode {
    pub fn bruteforce() -> Self {
        BreakpointMode::Bruteforce {
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupPartition {
    pub scheme: Granularity,
    pub shape: TensorShape,
    pub group_count: usize,
}

pub fn partition(shape: TensorShape, scheme: Granularity) -> GroupPartition {
    GroupPartition {
        scheme,
        shape,
        group_count: scheme.group_count(&shape),
    }
}

impl GroupPartition {
    pub fn group_of(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        let TensorShape {
            c: cs,
            h: hs,
            w: ws,
            ..
        } = self.shape;
        match self.scheme {
            Granularity::LayerWise => 0,
            Granularity::FilterWise => n,
            Granularity::ChannelWise => n * cs + c,
            Granularity::FShapeWise => (c * hs + h) * ws + w,
            Granularity::CShapeWise => (n * hs + h) * ws + w,
        }
    }

    pub fn group_of_index(&self, index: usize) -> usize {
        let [n, c, h, w] = self.shape.coords(index);
        self.group_of(n, c, h, w)
    }

    /// Flat element indices of every group, each in ascending order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.group_count];
        for i in 0..self.shape.element_count() {
            groups[self.group_of_index(i)].push(i);
        }
        groups
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupParams {
    Uniform(UniformParams),
    Pwlq(PwlqParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedTensor {
    pub name: String,
    pub shape: TensorShape,
    /// Storage type of the original weights.
    pub dtype: DType,
    pub method: Method,
    pub bits: u8,
    pub scheme: Granularity,
    pub group_params: Vec<GroupParams>,
    /// Signed k-bit codes in row-major order; empty for passthrough tensors.
    pub codes: Vec<i32>,
    /// Per-element tail flags, present iff `method` is PWLQ.
    pub region_bits: Option<Vec<bool>>,
    /// Original values of a tensor left unquantized.
    pub passthrough: Option<Vec<f64>>,
}

impl QuantizedTensor {
    /// Wraps `t` unquantized.
    pub fn passthrough(t: &WeightTensor, method: Method, bits: u8, scheme: Granularity) -> Self {
        Self {
            name: t.name.clone(),
            shape: t.shape,
            dtype: t.dtype,
            method,
            bits,
            scheme,
            group_params: Vec::new(),
            codes: Vec::new(),
            region_bits: None,
            passthrough: Some(t.values.clone()),
        }
    }

    pub fn is_passthrough(&self) -> bool {
        self.passthrough.is_some()
    }

    pub fn element_count(&self) -> usize {
        self.shape.element_count()
    }

    pub fn group_count(&self) -> usize {
        self.group_params.len()
    }

    pub fn partition(&self) -> GroupPartition {
        partition(self.shape, self.scheme)
    }

    /// Structural consistency: lengths agree with shape and partition.
    pub fn validate(&self) -> Result<()> {
        let e = self.element_count();
        let bad = |msg: String| {
            Err(Error::ShapeMismatch(format!(
                "tensor `{}`: {msg}",
                self.name
            )))
        };
        if let Some(values) = &self.passthrough {
            if values.len() != e {
                return bad(format!("{} passthrough values, expected {e}", values.len()));
            }
            return Ok(());
        }
        self.method.check_bits(self.bits)?;
        if self.codes.len() != e {
            return bad(format!("{} codes, expected {e}", self.codes.len()));
        }
        let groups = self.scheme.group_count(&self.shape);
        if self.group_params.len() != groups {
            return bad(format!(
                "{} group parameter sets, expected {groups}",
                self.group_params.len()
            ));
        }
        match (&self.region_bits, self.method) {
            (Some(r), Method::Pwlq) if r.len() == e => Ok(()),
            (None, m) if m != Method::Pwlq => Ok(()),
            _ => bad("region bitmap inconsistent with method".into()),
        }
    }
}

fn quantize_group(
    values: &[f64],
    method: Method,
    bits: u8,
    mode: BreakpointMode,
) -> Result<(GroupParams, Vec<(i32, bool)>)> {
    if let Some(scheme) = method.uniform_scheme() {
        let (params, codes) = quantize_slice(values, scheme, bits)?;
        return Ok((
            GroupParams::Uniform(params),
            codes.into_iter().map(|c| (c, false)).collect(),
        ));
    }
    let first = *values.first().ok_or(Error::EmptySlice)?;
    if values.iter().all(|&v| v == first) {
        let params = degenerate_params(first, bits)?;
        return Ok((
            GroupParams::Uniform(params),
            values
                .iter()
                .map(|&v| (params.quantize(v), false))
                .collect(),
        ));
    }
    let p = match mode {
        BreakpointMode::Approx => breakpoint_for_values(values)?,
        BreakpointMode::Bruteforce { grid_points } => {
            breakpoint_bruteforce(values, bits, grid_points)?
        }
    };
    let (params, codes) = pwlq_quantize(values, bits, p)?;
    Ok((
        GroupParams::Pwlq(params),
        codes
            .into_iter()
            .map(|c| {
                let (tail, v) = c.to_packed(bits);
                (v, tail)
            })
            .collect(),
    ))
}

/// Quantizes `t` group by group. Channel-wise quantization of a tensor with
/// 1x1 kernels returns a passthrough tensor.
pub fn quantize_tensor(
    t: &WeightTensor,
    scheme: Granularity,
    method: Method,
    bits: u8,
    mode: BreakpointMode,
) -> Result<QuantizedTensor> {
    method.check_bits(bits)?;
    if scheme.is_passthrough_for(&t.shape) {
        return Ok(QuantizedTensor::passthrough(t, method, bits, scheme));
    }
    let part = partition(t.shape, scheme);
    let members = part.members();
    let results = members
        .par_iter()
        .map(|idx| {
            let values: Vec<f64> = idx.iter().map(|&i| t.values[i]).collect();
            quantize_group(&values, method, bits, mode)
        })
        .collect::<Result<Vec<_>>>()?;

    let e = t.shape.element_count();
    let mut codes = vec![0i32; e];
    let mut regions = vec![false; e];
    let mut group_params = Vec::with_capacity(results.len());
    for (idx, (params, group_codes)) in members.iter().zip(results) {
        group_params.push(params);
        for (&i, (code, tail)) in idx.iter().zip(group_codes) {
            codes[i] = code;
            regions[i] = tail;
        }
    }
    Ok(QuantizedTensor {
        name: t.name.clone(),
        shape: t.shape,
        dtype: t.dtype,
        method,
        bits,
        scheme,
        group_params,
        codes,
        region_bits: (method == Method::Pwlq).then_some(regions),
        passthrough: None,
    })
}

/// Reconstructed value of element `index`.
pub(crate) fn decode_element(q: &QuantizedTensor, group: usize, index: usize) -> Result<f64> {
    let code = q.codes[index];
    let tail = q.region_bits.as_ref().is_some_and(|r| r[index]);
    let corrupt = |reason: String| Error::CorruptCodes {
        name: q.name.clone(),
        index,
        reason,
    };
    match &q.group_params[group] {
        GroupParams::Uniform(p) => {
            if tail {
                return Err(corrupt("tail flag set in a uniform group".into()));
            }
            p.dequantize(code).map_err(|e| corrupt(e.to_string()))
        }
        GroupParams::Pwlq(p) => {
            let half = 1i32 << (p.bits - 1);
            if code < -half || code >= half {
                return Err(corrupt(format!("code {code} exceeds {} bits", p.bits)));
            }
            p.decode(PwlqCode::from_packed(p.bits, tail, code))
                .map_err(|e| corrupt(e.to_string()))
        }
    }
}

pub fn dequantize_tensor(q: &QuantizedTensor) -> Result<WeightTensor> {
    if let Some(values) = &q.passthrough {
        return WeightTensor::new(q.name.clone(), q.shape, values.clone(), q.dtype);
    }
    q.validate()?;
    let part = q.partition();
    let values = (0..q.element_count())
        .into_par_iter()
        .map(|i| decode_element(q, part.group_of_index(i), i))
        .collect::<Result<Vec<_>>>()?;
    WeightTensor::new(q.name.clone(), q.shape, values, q.dtype)
}
