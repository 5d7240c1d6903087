//! Model-level quantization, reporting totals and bit-width sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::granularity::{quantize_tensor, BreakpointMode, Granularity, Method, QuantizedTensor};
use crate::metrics::{
    figure_of_merit, memory_bytes, memory_saving_ratio, quant_error, select_granularity,
    ErrorReport, MemoryModel,
};
use crate::tensor::ModelWeights;

/// A fixed granularity, or per-tensor selection among a candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GranularityChoice {
    Fixed(Granularity),
    /// filter, channel, f-shape and c-shape.
    Auto,
    /// filter, f-shape and c-shape.
    Auto3,
}

impl GranularityChoice {
    pub fn candidates(self) -> Vec<Granularity> {
        match self {
            GranularityChoice::Fixed(g) => vec![g],
            GranularityChoice::Auto => vec![
                Granularity::FilterWise,
                Granularity::ChannelWise,
                Granularity::FShapeWise,
                Granularity::CShapeWise,
            ],
            GranularityChoice::Auto3 => vec![
                Granularity::FilterWise,
                Granularity::FShapeWise,
                Granularity::CShapeWise,
            ],
        }
    }
}

impl FromStr for GranularityChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(GranularityChoice::Auto),
            "auto3" => Ok(GranularityChoice::Auto3),
            other => other.parse().map(GranularityChoice::Fixed),
        }
    }
}

impl fmt::Display for GranularityChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GranularityChoice::Fixed(g) => g.fmt(f),
            GranularityChoice::Auto => f.write_str("auto"),
            GranularityChoice::Auto3 => f.write_str("auto3"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantizeConfig {
    pub method: Method,
    pub bits: u8,
    pub granularity: GranularityChoice,
    pub breakpoint: BreakpointMode,
}

#[derive(Debug, Clone)]
pub struct TensorOutcome {
    pub tensor: QuantizedTensor,
    pub error: ErrorReport,
    pub excluded: bool,
}

/// Quantizes every tensor of `model`; excluded tensors pass through. Output
/// order follows the model regardless of scheduling.
pub fn quantize_model(model: &ModelWeights, cfg: &QuantizeConfig) -> Result<Vec<TensorOutcome>> {
    cfg.method.check_bits(cfg.bits)?;
    let candidates = cfg.granularity.candidates();
    model
        .tensors
        .par_iter()
        .map(|t| {
            if model.is_excluded(&t.name) {
                let tensor = QuantizedTensor::passthrough(t, cfg.method, cfg.bits, candidates[0]);
                let error = quant_error(t, &tensor)?;
                return Ok(TensorOutcome {
                    tensor,
                    error,
                    excluded: true,
                });
            }
            let (tensor, error) = match cfg.granularity {
                GranularityChoice::Fixed(g) => {
                    let q = quantize_tensor(t, g, cfg.method, cfg.bits, cfg.breakpoint)?;
                    let e = quant_error(t, &q)?;
                    (q, e)
                }
                _ => {
                    let s =
                        select_granularity(t, &candidates, cfg.method, cfg.bits, cfg.breakpoint)?;
                    (s.tensor, s.error)
                }
            };
            Ok(TensorOutcome {
                tensor,
                error,
                excluded: false,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSummary {
    /// Element-weighted MSE over all tensors (passthrough tensors add zero error).
    pub total_mse: f64,
    pub baseline_bytes: u64,
    pub bytes: u64,
    pub bytes_physical: u64,
    pub memory_saving: f64,
    pub memory_saving_physical: f64,
}

pub fn summarize(outcomes: &[TensorOutcome], mm: &MemoryModel) -> Result<ModelSummary> {
    let tensors: Vec<QuantizedTensor> = outcomes.iter().map(|o| o.tensor.clone()).collect();
    let sse: f64 = outcomes.iter().map(|o| o.error.sse()).sum();
    let elements: usize = outcomes.iter().map(|o| o.error.element_count).sum();
    let regions_free = MemoryModel {
        charge_region_bits: false,
        ..*mm
    };
    let physical = mm.physical();
    Ok(ModelSummary {
        total_mse: if elements == 0 {
            0.0
        } else {
            sse / elements as f64
        },
        baseline_bytes: tensors
            .iter()
            .map(|q| mm.baseline_bytes(q.element_count()))
            .sum(),
        bytes: tensors.iter().map(|q| memory_bytes(q, &regions_free)).sum(),
        bytes_physical: tensors.iter().map(|q| memory_bytes(q, &physical)).sum(),
        memory_saving: memory_saving_ratio(&tensors, &regions_free)?,
        memory_saving_physical: memory_saving_ratio(&tensors, &physical)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub bits: u8,
    pub total_mse: f64,
    pub memory_saving: f64,
    pub memory_saving_physical: f64,
    pub figure_of_merit: Option<f64>,
}

/// Runs `cfg` once per bit width. `losses` maps a bit width to a measured
/// accuracy loss in percentage points; rows without one get no figure of merit.
pub fn sweep(
    model: &ModelWeights,
    cfg: &QuantizeConfig,
    bits: RangeInclusive<u8>,
    mm: &MemoryModel,
    losses: &BTreeMap<u8, f64>,
) -> Result<Vec<SweepRow>> {
    let (lo, hi) = (*bits.start(), *bits.end());
    let min = if cfg.method == Method::Pwlq { 3 } else { 2 };
    if lo > hi || lo < min || hi > 8 {
        return Err(Error::InvalidRange(format!(
            "bits {lo}..={hi} outside [{min}, 8] for {}",
            cfg.method
        )));
    }
    bits.map(|k| {
        let outcomes = quantize_model(model, &QuantizeConfig { bits: k, ..*cfg })?;
        let s = summarize(&outcomes, mm)?;
        let fom = losses
            .get(&k)
            .map(|&loss| figure_of_merit(s.memory_saving, loss))
            .transpose()?;
        Ok(SweepRow {
            bits: k,
            total_mse: s.total_mse,
            memory_saving: s.memory_saving,
            memory_saving_physical: s.memory_saving_physical,
            figure_of_merit: fom,
        })
    })
    .collect()
}
