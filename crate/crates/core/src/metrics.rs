//! Reconstruction error, granularity auto-selection and memory accounting.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::granularity::{
    dequantize_tensor, quantize_tensor, BreakpointMode, Granularity, Method, QuantizedTensor,
};
use crate::tensor::WeightTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mse: f64,
    pub max_abs: f64,
    pub element_count: usize,
}

impl ErrorReport {
    pub fn sse(&self) -> f64 {
        self.mse * self.element_count as f64
    }
}

pub fn quant_error(original: &WeightTensor, q: &QuantizedTensor) -> Result<ErrorReport> {
    if original.shape != q.shape {
        return Err(Error::ShapeMismatch(format!(
            "original {} vs quantized {}",
            original.shape, q.shape
        )));
    }
    let element_count = original.values.len();
    if q.is_passthrough() {
        return Ok(ErrorReport {
            mse: 0.0,
            max_abs: 0.0,
            element_count,
        });
    }
    let back = dequantize_tensor(q)?;
    let (sse, max_abs) =
        original
            .values
            .iter()
            .zip(&back.values)
            .fold((0.0f64, 0.0f64), |(s, m), (a, b)| {
                let d = (a - b).abs();
                (s + d * d, m.max(d))
            });
    Ok(ErrorReport {
        mse: sse / element_count as f64,
        max_abs,
        element_count,
    })
}

/// Tie-break rank; lower wins.
fn preference(g: Granularity) -> u8 {
    match g {
        Granularity::CShapeWise => 0,
        Granularity::FShapeWise => 1,
        Granularity::FilterWise => 2,
        Granularity::ChannelWise => 3,
        Granularity::LayerWise => 4,
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub scheme: Granularity,
    pub tensor: QuantizedTensor,
    pub error: ErrorReport,
}

/// Quantizes `t` under every candidate and keeps the one with the lowest
/// MSE. Passthrough-producing candidates only count when nothing else is
/// available.
pub fn select_granularity(
    t: &WeightTensor,
    candidates: &[Granularity],
    method: Method,
    bits: u8,
    mode: BreakpointMode,
) -> Result<Selection> {
    let mut ordered: Vec<Granularity> = candidates.to_vec();
    ordered.sort_by_key(|&g| preference(g));
    ordered.dedup();
    if ordered.is_empty() {
        return Err(Error::NoViableCandidate);
    }
    let viable: Vec<Granularity> = ordered
        .iter()
        .copied()
        .filter(|g| !g.is_passthrough_for(&t.shape))
        .collect();
    if viable.is_empty() {
        let scheme = ordered[0];
        let tensor = quantize_tensor(t, scheme, method, bits, mode)?;
        let error = quant_error(t, &tensor)?;
        return Ok(Selection {
            scheme,
            tensor,
            error,
        });
    }

    let evaluated = viable
        .par_iter()
        .map(|&g| {
            let q = quantize_tensor(t, g, method, bits, mode)?;
            let e = quant_error(t, &q)?;
            Ok((g, q, e))
        })
        .collect::<Result<Vec<_>>>()?;

    // `evaluated` follows preference order, so strict `<` keeps the preferred
    // scheme on ties.
    let mut best: Option<(Granularity, QuantizedTensor, ErrorReport)> = None;
    for (g, q, e) in evaluated {
        if best.as_ref().is_none_or(|(_, _, b)| e.mse < b.mse) {
            best = Some((g, q, e));
        }
    }
    let (scheme, tensor, error) = best.ok_or(Error::NoViableCandidate)?;
    Ok(Selection {
        scheme,
        tensor,
        error,
    })
}

/// Byte-cost model for quantized storage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryModel {
    pub baseline_bits_per_element: u32,
    pub param_bytes_affine: u32,
    pub param_bytes_symmetric: u32,
    pub param_bytes_pwlq: u32,
    /// Charge one region bit per PWLQ element.
    pub charge_region_bits: bool,
}

impl Default for MemoryModel {
    fn default() -> Self {
        Self {
            baseline_bits_per_element: 16,
            param_bytes_affine: 4,
            param_bytes_symmetric: 2,
            param_bytes_pwlq: 10,
            charge_region_bits: false,
        }
    }
}

impl MemoryModel {
    pub fn physical(self) -> Self {
        Self {
            charge_region_bits: true,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.baseline_bits_per_element == 0
            || self.param_bytes_affine == 0
            || self.param_bytes_symmetric == 0
            || self.param_bytes_pwlq == 0
        {
            return Err(Error::InvalidInput(
                "memory model byte counts must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn param_bytes(&self, method: Method) -> u64 {
        (match method {
            Method::Affine => self.param_bytes_affine,
            Method::SymmetricRestricted | Method::SymmetricFull => self.param_bytes_symmetric,
            Method::Pwlq => self.param_bytes_pwlq,
        }) as u64
    }

    pub fn baseline_bytes(&self, element_count: usize) -> u64 {
        (element_count as u64 * self.baseline_bits_per_element as u64).div_ceil(8)
    }
}

pub fn memory_bytes(q: &QuantizedTensor, model: &MemoryModel) -> u64 {
    let e = q.element_count() as u64;
    if q.is_passthrough() {
        return model.baseline_bytes(q.element_count());
    }
    let codes = (e * q.bits as u64).div_ceil(8);
    let params = q.group_count() as u64 * model.param_bytes(q.method);
    let regions = if model.charge_region_bits && q.method == Method::Pwlq {
        e.div_ceil(8)
    } else {
        0
    };
    codes + params + regions
}

/// Whole-model baseline bytes over quantized bytes. Passthrough tensors count
/// at baseline on both sides.
pub fn memory_saving_ratio(all: &[QuantizedTensor], model: &MemoryModel) -> Result<f64> {
    if all.is_empty() {
        return Err(Error::InvalidInput("no tensors to account".into()));
    }
    let baseline: u64 = all
        .iter()
        .map(|q| model.baseline_bytes(q.element_count()))
        .sum();
    let stored: u64 = all.iter().map(|q| memory_bytes(q, model)).sum();
    Ok(baseline as f64 / stored as f64)
}

/// `memory_saving / (accuracy_loss_pct + 1)`.
pub fn figure_of_merit(memory_saving: f64, accuracy_loss_pct: f64) -> Result<f64> {
    if !memory_saving.is_finite() || memory_saving <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "memory saving must be positive, got {memory_saving}"
        )));
    }
    if !accuracy_loss_pct.is_finite() || accuracy_loss_pct < 0.0 {
        return Err(Error::InvalidInput(format!(
            "accuracy loss must be non-negative, got {accuracy_loss_pct}"
        )));
    }
    Ok(memory_saving / (accuracy_loss_pct + 1.0))
}
