//! The `qnt/1` container for quantized models.
//!
//! Layout:
//!
//! ```text
//! qnt/1 <header-length>\n
//! <header: TOML, header-length bytes>
//! <payload>
//! ```
//!
//! Section offsets in the header are relative to the start of the payload.
//! Group parameter tables are little-endian binary records; reals are stored
//! as IEEE binary16 and zero-points as i16:
//!
//! ```text
//! uniform: tag u8 (0 affine, 1 symmetric-restricted, 2 symmetric-full), bits u8,
//!          scale f16, zero_point i16, beta f16, alpha f16
//! pwlq:    tag u8 (3), bits u8, m f16, p f16,
//!          center, neg_tail, pos_tail (three uniform records)
//! ```
//!
//! Codes are packed with [`pack_codes`]; PWLQ region flags with [`pack_bits`];
//! passthrough tensors are stored raw at their source dtype.

use std::fs;
use std::path::Path;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::granularity::{Granularity, GroupParams, Method, QuantizedTensor};
use crate::metrics::MemoryModel;
use crate::pack::{pack_bits, pack_codes, packed_len, unpack_bits, unpack_codes, PackedCodes};
use crate::pwlq::PwlqParams;
use crate::tensor::{DType, TensorShape};
use crate::uniform::{ClipRange, Scheme, UniformParams};

pub const FORMAT_VERSION: &str = "qnt/1";

const TAG_PWLQ: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub offset: u64,
    pub len: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: [usize; 4],
    dtype: DType,
    method: Method,
    scheme: Granularity,
    bits: u8,
    group_count: usize,
    passthrough: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    codes: Option<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    regions: Option<Section>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw: Option<Section>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    format: String,
    payload_bytes: u64,
    memory_model: MemoryModel,
    #[serde(default, rename = "tensor")]
    tensors: Vec<TensorRecord>,
}

fn round16(x: f64) -> f64 {
    f16::from_f64(x).to_f64()
}

fn uniform_to_storage(p: &UniformParams) -> UniformParams {
    UniformParams {
        scale: round16(p.scale),
        clip: ClipRange {
            beta: round16(p.clip.beta),
            alpha: round16(p.clip.alpha),
        },
        ..*p
    }
}

fn group_to_storage(g: &GroupParams) -> GroupParams {
    match g {
        GroupParams::Uniform(u) => GroupParams::Uniform(uniform_to_storage(u)),
        GroupParams::Pwlq(p) => GroupParams::Pwlq(PwlqParams {
            m: round16(p.m),
            p: round16(p.p),
            center: uniform_to_storage(&p.center),
            neg_tail: uniform_to_storage(&p.neg_tail),
            pos_tail: uniform_to_storage(&p.pos_tail),
            ..*p
        }),
    }
}

/// `q` with every stored real rounded as the container stores it: group
/// parameters to binary16, passthrough values to their source dtype.
pub fn to_storage_precision(q: &QuantizedTensor) -> QuantizedTensor {
    QuantizedTensor {
        group_params: q.group_params.iter().map(group_to_storage).collect(),
        passthrough: q
            .passthrough
            .as_ref()
            .map(|v| q.dtype.decode(&q.dtype.encode(v))),
        ..q.clone()
    }
}

fn scheme_tag(s: Scheme) -> u8 {
    match s {
        Scheme::Affine => 0,
        Scheme::SymmetricRestricted => 1,
        Scheme::SymmetricFull => 2,
    }
}

fn put_real(out: &mut Vec<u8>, x: f64, what: &str, name: &str, positive: bool) -> Result<()> {
    let h = f16::from_f64(x);
    if !h.is_finite() || (positive && h.to_f64() <= 0.0) {
        return Err(Error::NotRepresentable {
            name: name.to_owned(),
            reason: format!("{what} {x} does not fit binary16"),
        });
    }
    out.extend_from_slice(&h.to_le_bytes());
    Ok(())
}

fn put_uniform(out: &mut Vec<u8>, p: &UniformParams, name: &str) -> Result<()> {
    out.push(scheme_tag(p.scheme));
    out.push(p.bits);
    put_real(out, p.scale, "scale", name, true)?;
    let z = i16::try_from(p.zero_point).map_err(|_| Error::NotRepresentable {
        name: name.to_owned(),
        reason: format!("zero-point {} does not fit i16", p.zero_point),
    })?;
    out.extend_from_slice(&z.to_le_bytes());
    put_real(out, p.clip.beta, "clip bound", name, false)?;
    put_real(out, p.clip.alpha, "clip bound", name, false)?;
    Ok(())
}

fn encode_params(q: &QuantizedTensor) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for g in &q.group_params {
        match g {
            GroupParams::Uniform(u) => put_uniform(&mut out, u, &q.name)?,
            GroupParams::Pwlq(p) => {
                out.push(TAG_PWLQ);
                out.push(p.bits);
                put_real(&mut out, p.m, "tail bound", &q.name, true)?;
                put_real(&mut out, p.p, "breakpoint", &q.name, true)?;
                put_uniform(&mut out, &p.center, &q.name)?;
                put_uniform(&mut out, &p.neg_tail, &q.name)?;
                put_uniform(&mut out, &p.pos_tail, &q.name)?;
            }
        }
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CorruptHeader(format!(
                "parameter table of `{}` is too short",
                self.name
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn real(&mut self) -> Result<f64> {
        let b = self.take(2)?;
        Ok(f16::from_le_bytes([b[0], b[1]]).to_f64())
    }

    fn i16(&mut self) -> Result<i16> {
        let b = self.take(2)?;
        Ok(i16::from_le_bytes([b[0], b[1]]))
    }

    fn uniform_body(&mut self, tag: u8) -> Result<UniformParams> {
        let scheme = match tag {
            0 => Scheme::Affine,
            1 => Scheme::SymmetricRestricted,
            2 => Scheme::SymmetricFull,
            t => {
                return Err(Error::CorruptHeader(format!(
                    "unknown parameter tag {t} in `{}`",
                    self.name
                )))
            }
        };
        let p = UniformParams {
            scheme,
            bits: self.u8()?,
            scale: self.real()?,
            zero_point: self.i16()? as i32,
            clip: ClipRange {
                beta: self.real()?,
                alpha: self.real()?,
            },
        };
        p.validate()
            .map_err(|e| Error::CorruptHeader(format!("tensor `{}`: {e}", self.name)))?;
        Ok(p)
    }

    fn uniform(&mut self) -> Result<UniformParams> {
        let tag = self.u8()?;
        self.uniform_body(tag)
    }

    fn group(&mut self) -> Result<GroupParams> {
        let tag = self.u8()?;
        if tag != TAG_PWLQ {
            return Ok(GroupParams::Uniform(self.uniform_body(tag)?));
        }
        Ok(GroupParams::Pwlq(PwlqParams {
            bits: self.u8()?,
            m: self.real()?,
            p: self.real()?,
            center: self.uniform()?,
            neg_tail: self.uniform()?,
            pos_tail: self.uniform()?,
        }))
    }
}

/// Serializes a model to container bytes.
pub fn encode_container(model: &[QuantizedTensor], mm: &MemoryModel) -> Result<Vec<u8>> {
    let mut payload = Vec::new();
    let mut records = Vec::with_capacity(model.len());
    let push = |payload: &mut Vec<u8>, bytes: Vec<u8>| {
        let s = Section {
            offset: payload.len() as u64,
            len: bytes.len() as u64,
        };
        payload.extend_from_slice(&bytes);
        Some(s)
    };
    for q in model {
        q.validate()?;
        let mut rec = TensorRecord {
            name: q.name.clone(),
            shape: q.shape.dims(),
            dtype: q.dtype,
            method: q.method,
            scheme: q.scheme,
            bits: q.bits,
            group_count: q.group_count(),
            passthrough: q.is_passthrough(),
            params: None,
            codes: None,
            regions: None,
            raw: None,
        };
        if let Some(values) = &q.passthrough {
            rec.raw = push(&mut payload, q.dtype.encode(values));
        } else {
            rec.params = push(&mut payload, encode_params(q)?);
            rec.codes = push(&mut payload, pack_codes(&q.codes, q.bits)?.data);
            if let Some(regions) = &q.region_bits {
                rec.regions = push(&mut payload, pack_bits(regions));
            }
        }
        records.push(rec);
    }
    let header = Header {
        format: FORMAT_VERSION.to_owned(),
        payload_bytes: payload.len() as u64,
        memory_model: *mm,
        tensors: records,
    };
    let text = toml::to_string(&header).map_err(|e| Error::CorruptHeader(e.to_string()))?;
    let mut out = format!("{FORMAT_VERSION} {}\n", text.len()).into_bytes();
    out.extend_from_slice(text.as_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn write_container(
    model: &[QuantizedTensor],
    mm: &MemoryModel,
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = encode_container(model, mm)?;
    fs::write(path, bytes)?;
    Ok(())
}

fn section<'a>(payload: &'a [u8], s: Option<Section>, name: &str, what: &str) -> Result<&'a [u8]> {
    let s =
        s.ok_or_else(|| Error::CorruptHeader(format!("tensor `{name}` has no {what} section")))?;
    let end = s.offset.checked_add(s.len);
    match end {
        Some(end) if end <= payload.len() as u64 => Ok(&payload[s.offset as usize..end as usize]),
        _ => Err(Error::OffsetOutOfBounds {
            name: name.to_owned(),
            section: what.to_owned(),
        }),
    }
}

fn expect_len(bytes: &[u8], expected: usize, name: &str, what: &str) -> Result<()> {
    if bytes.len() != expected {
        return Err(Error::CorruptHeader(format!(
            "tensor `{name}`: {what} section is {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    Ok(())
}

fn decode_record(rec: &TensorRecord, payload: &[u8]) -> Result<QuantizedTensor> {
    let name = rec.name.as_str();
    let shape = TensorShape::from_dims(&rec.shape)?;
    let e = shape.element_count();
    let mut q = QuantizedTensor {
        name: rec.name.clone(),
        shape,
        dtype: rec.dtype,
        method: rec.method,
        bits: rec.bits,
        scheme: rec.scheme,
        group_params: Vec::new(),
        codes: Vec::new(),
        region_bits: None,
        passthrough: None,
    };
    if rec.passthrough {
        let raw = section(payload, rec.raw, name, "raw")?;
        expect_len(raw, e * rec.dtype.byte_width(), name, "raw")?;
        q.passthrough = Some(rec.dtype.decode(raw));
        return Ok(q);
    }

    rec.method.check_bits(rec.bits)?;
    let params = section(payload, rec.params, name, "params")?;
    let mut reader = Reader {
        buf: params,
        pos: 0,
        name,
    };
    for _ in 0..rec.group_count {
        q.group_params.push(reader.group()?);
    }
    if reader.pos != params.len() {
        return Err(Error::CorruptHeader(format!(
            "tensor `{name}`: trailing bytes in parameter table"
        )));
    }

    let codes = section(payload, rec.codes, name, "codes")?;
    expect_len(codes, packed_len(e, rec.bits), name, "codes")?;
    q.codes = unpack_codes(&PackedCodes {
        bits: rec.bits,
        count: e,
        data: codes.to_vec(),
    })?;

    if rec.method == Method::Pwlq {
        let regions = section(payload, rec.regions, name, "regions")?;
        expect_len(regions, e.div_ceil(8), name, "regions")?;
        q.region_bits = Some(unpack_bits(regions, e)?);
    }
    q.validate()
        .map_err(|err| Error::CorruptHeader(format!("tensor `{name}`: {err}")))?;
    Ok(q)
}

fn check_overlaps(header: &Header) -> Result<()> {
    let mut spans: Vec<(u64, u64, &str)> = header
        .tensors
        .iter()
        .flat_map(|r| {
            [r.params, r.codes, r.regions, r.raw]
                .into_iter()
                .flatten()
                .map(move |s| (s.offset, s.offset.saturating_add(s.len), r.name.as_str()))
        })
        .filter(|(a, b, _)| b > a)
        .collect();
    spans.sort();
    for w in spans.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::CorruptHeader(format!(
                "sections of `{}` and `{}` overlap",
                w[0].2, w[1].2
            )));
        }
    }
    Ok(())
}

/// Parses container bytes.
pub fn decode_container(bytes: &[u8]) -> Result<(Vec<QuantizedTensor>, MemoryModel)> {
    let nl = bytes
        .iter()
        .take(64)
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::CorruptHeader("missing format line".into()))?;
    let line = std::str::from_utf8(&bytes[..nl])
        .map_err(|_| Error::CorruptHeader("format line is not UTF-8".into()))?;
    let mut parts = line.split(' ');
    let version = parts.next().unwrap_or_default();
    if version != FORMAT_VERSION {
        return if version.starts_with("qnt/") {
            Err(Error::VersionMismatch(version.to_owned()))
        } else {
            Err(Error::CorruptHeader(format!("bad magic `{version}`")))
        };
    }
    let header_len: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::CorruptHeader("missing header length".into()))?;
    let start = nl + 1;
    let payload_start = start
        .checked_add(header_len)
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::CorruptHeader("header extends past end of file".into()))?;
    let text = std::str::from_utf8(&bytes[start..payload_start])
        .map_err(|_| Error::CorruptHeader("header is not UTF-8".into()))?;
    let header: Header = toml::from_str(text).map_err(|e| Error::CorruptHeader(e.to_string()))?;
    if header.format != FORMAT_VERSION {
        return Err(Error::VersionMismatch(header.format));
    }
    let payload = &bytes[payload_start..];

    let tensors = header
        .tensors
        .iter()
        .map(|rec| decode_record(rec, payload))
        .collect::<Result<Vec<_>>>()?;
    check_overlaps(&header)?;
    if header.payload_bytes != payload.len() as u64 {
        return Err(Error::CorruptHeader(format!(
            "payload is {} bytes, header declares {}",
            payload.len(),
            header.payload_bytes
        )));
    }
    let mut names = std::collections::HashSet::new();
    if let Some(dup) = tensors.iter().find(|t| !names.insert(t.name.as_str())) {
        return Err(Error::DuplicateName(dup.name.clone()));
    }
    header.memory_model.validate()?;
    Ok((tensors, header.memory_model))
}

pub fn read_container(path: impl AsRef<Path>) -> Result<(Vec<QuantizedTensor>, MemoryModel)> {
    decode_container(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::granularity::{quantize_tensor, BreakpointMode};
    use crate::tensor::WeightTensor;

    fn sample(method: Method, scheme: Granularity) -> QuantizedTensor {
        let s = TensorShape::new(3, 2, 3, 3).unwrap();
        let values = (0..s.element_count())
            .map(|i| ((i * 37 % 23) as f64 - 11.0) / 40.0)
            .collect();
        let t = WeightTensor::new(format!("{method}-{scheme}"), s, values, DType::F16).unwrap();
        quantize_tensor(&t, scheme, method, 4, BreakpointMode::Approx).unwrap()
    }

    #[test]
    fn empty_model_round_trips() {
        let bytes = encode_container(&[], &MemoryModel::default()).unwrap();
        let (t, mm) = decode_container(&bytes).unwrap();
        assert!(t.is_empty());
        assert_eq!(mm, MemoryModel::default());
    }

    #[test]
    fn round_trip_after_storage_rounding() {
        let model = vec![
            sample(Method::Affine, Granularity::FilterWise),
            sample(Method::Pwlq, Granularity::CShapeWise),
            sample(Method::SymmetricRestricted, Granularity::LayerWise),
        ];
        let mm = MemoryModel::default().physical();
        let bytes = encode_container(&model, &mm).unwrap();
        let (back, mm2) = decode_container(&bytes).unwrap();
        assert_eq!(mm2, mm);
        let expected: Vec<_> = model.iter().map(to_storage_precision).collect();
        assert_eq!(back, expected);
        assert_eq!(encode_container(&model, &mm).unwrap(), bytes);
    }

    #[test]
    fn version_and_header_errors() {
        let mut bytes = encode_container(&[], &MemoryModel::default()).unwrap();
        bytes[4] = b'2';
        assert!(matches!(
            decode_container(&bytes),
            Err(Error::VersionMismatch(_))
        ));
        assert!(matches!(
            decode_container(b"garbage\n"),
            Err(Error::CorruptHeader(_))
        ));
        assert!(matches!(
            decode_container(b"qnt/1 9999\nformat"),
            Err(Error::CorruptHeader(_))
        ));
    }

    #[test]
    fn truncated_payload_is_out_of_bounds() {
        let model = vec![sample(Method::Affine, Granularity::FShapeWise)];
        let bytes = encode_container(&model, &MemoryModel::default()).unwrap();
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(
            decode_container(cut),
            Err(Error::OffsetOutOfBounds { .. })
        ));
    }

    #[test]
    fn unrepresentable_zero_point_rejected() {
        let s = TensorShape::new(1, 1, 1, 2).unwrap();
        let t = WeightTensor::new("z", s, vec![100.0, 100.001], DType::F32).unwrap();
        let q = quantize_tensor(
            &t,
            Granularity::LayerWise,
            Method::Affine,
            4,
            BreakpointMode::Approx,
        )
        .unwrap();
        assert!(matches!(
            encode_container(&[q], &MemoryModel::default()),
            Err(Error::NotRepresentable { .. })
        ));
    }
}
