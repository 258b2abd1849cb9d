//! Core library of the OCTAV quantization toolkit: a dense f64 tensor
//! container with grouped (per-tensor / per-row) views, the OCTV binary
//! tensor format, uniform clipped and max-scaled quantizers, quantization
//! noise analysis (empirical and histogram-model MSE, sweeps, percentiles),
//! the OCTAV Newton-Raphson solver for MSE-optimal clipping scalars, and the
//! STE/PWL/MAD gradient estimators used by fake quantization.

pub mod error;
pub mod estimators;
pub mod io;
pub mod noise;
pub mod quantizer;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use estimators::{attenuate, attenuation, backward, fake_quant, EstimatorKind, MphPolicy};
pub use io::{load_tensor, save_tensor, save_tensor_as, StorageDtype};
pub use noise::{
    analytical_mse, build_histogram, empirical_mse, local_minima, percentile_magnitude, sweep,
    Histogram, MseCurve, SweepMode, DEFAULT_BINS,
};
pub use quantizer::{
    max_scalar, quantize_clipped, quantize_max_scaled, BoundaryMode, QuantSpec, RoundingMode,
    ScalarSet, Signedness,
};
pub use solver::{mse_derivatives, octav, octav_step, OctavConfig, OctavInit, OctavTrace};
pub use tensor::{group_view, pairwise_map_sum, reduce_sum, Granularity, GroupView, Tensor};
