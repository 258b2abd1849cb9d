//! Toy quantization-aware-training harness.
//!
//! A bias-free MLP with hand-written backprop and fake-quant sites, plus the
//! instrumentation that makes low-precision training effects measurable at
//! desk scale: gradient-variance probes comparing estimator masks, exact
//! learned-parameter counting under static clipping, and a deterministic
//! SGD loop over synthetic Gaussian-blob classification data.

pub mod data;
pub mod learned;
pub mod net;
pub mod train;
pub mod variance;

pub use data::{BlobConfig, Dataset};
pub use learned::{track_learned_params, LearnedParamCount};
pub use net::{
    forward_backward, softmax_cross_entropy, Activation, EstimatorChoice, ForwardCache, Gradients,
    Layer, LayerScalars, QuantMode, ToyNet,
};
pub use train::{train_toy, AccuracyCurve, TrainConfig};
pub use variance::{
    calibrate_activation_percentiles, measure_variance_ratio, random_orthogonal,
    GradientVarianceReport, LayerVariance,
};
