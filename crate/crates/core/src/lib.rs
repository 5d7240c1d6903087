//! Post-training weight quantization for convolutional weight tensors.
//!
//! Uniform (affine, symmetric) and piece-wise linear quantization at five
//! grouping granularities, per-tensor granularity selection by reconstruction
//! error, sub-byte code packing, a binary container format and memory-saving
//! accounting.

pub mod container;
pub mod error;
pub mod granularity;
pub mod metrics;
pub mod pack;
pub mod pipeline;
pub mod pwlq;
pub mod tensor;
pub mod uniform;

pub use container::{read_container, to_storage_precision, write_container, FORMAT_VERSION};
pub use error::{Error, Result};
pub use granularity::{
    dequantize_tensor, partition, quantize_tensor, BreakpointMode, Granularity, GroupParams,
    GroupPartition, Method, QuantizedTensor,
};
pub use metrics::{
    figure_of_merit, memory_bytes, memory_saving_ratio, quant_error, select_granularity,
    ErrorReport, MemoryModel, Selection,
};
pub use pack::{pack_codes, unpack_codes, PackedCodes};
pub use pipeline::{quantize_model, summarize, sweep, GranularityChoice, QuantizeConfig};
pub use pwlq::{
    breakpoint_approx, breakpoint_bruteforce, pwlq_dequantize, pwlq_quantize, PwlqCode, PwlqParams,
};
pub use tensor::{
    element_index, load_manifest, write_manifest, DType, ModelWeights, TensorShape, WeightTensor,
};
pub use uniform::{
    affine_params, clip, quantize_slice, symmetric_params, uniform_dequantize, uniform_quantize,
    ClipRange, Scheme, SymmetricVariant, UniformParams,
};
