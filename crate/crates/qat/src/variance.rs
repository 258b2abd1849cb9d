//! STE-vs-PWL gradient variance measurement across layers.
//!
//! One forward pass per batch feeds two backward passes that share the same
//! injected unit-Gaussian upstream gradient and differ only in the estimator
//! mask. Each clipping site multiplies the surviving gradient mass by the
//! fraction of in-range elements, so the STE/PWL variance ratio at layer `l`
//! is predicted by the product of `1 / (1 - p_i)` over the clipping
//! probabilities `p_i` of layers `i >= l`.

use crate::net::{EstimatorChoice, LayerScalars, QuantMode, ToyNet};
use octav_core::{
    pairwise_map_sum, percentile_magnitude, reduce_sum, Error, Granularity, GroupView, Result,
    Tensor,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::io::Write;

/// Measured and predicted gradient-variance statistics for one layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerVariance {
    pub layer: usize,
    /// Mean over batches of the per-batch STE gradient variance.
    pub var_ste: f64,
    /// Mean over batches of the per-batch PWL gradient variance.
    pub var_pwl: f64,
    /// Mean over batches of the per-batch variance ratio STE / PWL.
    pub ratio: f64,
    /// Standard error of `ratio` across batches.
    pub std_error: f64,
    /// Pooled fraction of activation entries beyond the clipping scalar.
    pub clip_probability: f64,
    /// Product of `1 / (1 - p_i)` over this and all deeper layers.
    pub predicted_ratio: f64,
}

/// Per-layer variance ratios with their statistical context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientVarianceReport {
    pub layers: Vec<LayerVariance>,
    pub batches: usize,
}

impl GradientVarianceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "layer,var_ste,var_pwl,ratio,std_error,clip_probability,predicted_ratio"
        )?;
        for l in &self.layers {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                l.layer, l.var_ste, l.var_pwl, l.ratio, l.std_error, l.clip_probability,
                l.predicted_ratio
            )?;
        }
        Ok(())
    }
}

/// Runs paired STE/PWL backward passes over `batches` and reports per-layer
/// variance ratios of the gradient with respect to each layer's input,
/// against the ratio predicted from the measured clipping probabilities.
///
/// The injected upstream gradient is seeded, so the measurement is
/// deterministic. Needs at least two batches for a standard error; a layer
/// whose PWL gradient variance vanishes is reported as degenerate.
pub fn measure_variance_ratio(
    net: &ToyNet,
    batches: &[Tensor],
    seed: u64,
) -> Result<GradientVarianceReport> {
    if batches.len() < 2 {
        return Err(Error::InvalidParameter {
            reason: format!("need at least 2 batches for a standard error, got {}", batches.len()),
        });
    }

    let count = net.layer_count();
    let mut ratios: Vec<Vec<f64>> = vec![Vec::with_capacity(batches.len()); count];
    let mut vs_sum = vec![0.0f64; count];
    let mut vp_sum = vec![0.0f64; count];
    let mut clipped = vec![0u64; count];
    let mut seen = vec![0u64; count];

    let (ste_w, ste_a) = EstimatorChoice::Ste.rules();
    let (pwl_w, pwl_a) = EstimatorChoice::Pwl.rules();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for batch in batches {
        let cache = net.forward(batch)?;

        for l in 0..count {
            if let Some(set) = cache.activation_scalars(l) {
                let x = cache.activation_input(l).data();
                let view = *set.view();
                let scalars = set.scalars();
                for (i, v) in x.iter().enumerate() {
                    let g = view.group_of(i);
                    seen[l] += 1;
                    if !set.is_degenerate(g) && v.abs() > scalars[g] {
                        clipped[l] += 1;
                    }
                }
            }
        }

        let delta: Vec<f64> =
            (0..cache.output().len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let delta = Tensor::from_vec(delta, cache.output().shape())?;

        let gs = net.backward_with(&cache, &delta, Some((ste_w, ste_a)))?;
        let gp = net.backward_with(&cache, &delta, Some((pwl_w, pwl_a)))?;

        for l in 0..count {
            let vs = population_variance(gs.activations[l].data());
            let vp = population_variance(gp.activations[l].data());
            if vp == 0.0 {
                return Err(Error::Degenerate {
                    context: format!("zero PWL gradient variance at layer {l}"),
                });
            }
            vs_sum[l] += vs;
            vp_sum[l] += vp;
            ratios[l].push(vs / vp);
        }
    }

    let clip_prob: Vec<f64> = (0..count)
        .map(|l| if seen[l] > 0 { clipped[l] as f64 / seen[l] as f64 } else { 0.0 })
        .collect();

    // Suffix products of the per-site survival rates, deepest layer first.
    let mut predicted = vec![1.0f64; count];
    let mut acc = 1.0f64;
    for l in (0..count).rev() {
        let survive = 1.0 - clip_prob[l];
        if survive <= 0.0 {
            return Err(Error::Degenerate {
                context: format!("every activation clips at layer {l}"),
            });
        }
        acc /= survive;
        predicted[l] = acc;
    }

    let b = batches.len() as f64;
    let layers = (0..count)
        .map(|l| {
            let mean = reduce_sum(&ratios[l]) / b;
            let ss = pairwise_map_sum(&ratios[l], |r| {
                let d = r - mean;
                d * d
            });
            let std_error = (ss / (b - 1.0)).sqrt() / b.sqrt();
            LayerVariance {
                layer: l,
                var_ste: vs_sum[l] / b,
                var_pwl: vp_sum[l] / b,
                ratio: mean,
                std_error,
                clip_probability: clip_prob[l],
                predicted_ratio: predicted[l],
            }
        })
        .collect();

    Ok(GradientVarianceReport { layers, batches: batches.len() })
}

/// Returns a seeded `dim x dim` random orthogonal matrix as a tensor.
///
/// Variance probes need mixing layers whose per-unit statistics are uniform:
/// with orthogonal weights every unit has the same forward variance and the
/// same backward variance, so the measured clipping probability is the only
/// quantity entering the predicted ratio. Gaussian-initialized weights leave
/// per-unit rates and variances fluctuating with row and column norms, which
/// biases the ratio away from the prediction by far more than its standard
/// error. Built by Gram-Schmidt on a Gaussian draw; each row is
/// orthogonalized twice to hold the residual near machine precision.
pub fn random_orthogonal(dim: usize, seed: u64) -> Result<Tensor> {
    if dim == 0 {
        return Err(Error::InvalidParameter {
            reason: "an orthogonal matrix needs a positive dimension".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    for i in 0..dim {
        let (done, rest) = rows.split_at_mut(i);
        let row = &mut rest[0];
        for _ in 0..2 {
            for prev in done.iter() {
                let dot: f64 = row.iter().zip(prev.iter()).map(|(a, b)| a * b).sum();
                for (a, b) in row.iter_mut().zip(prev.iter()) {
                    *a -= dot * b;
                }
            }
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-8 {
            return Err(Error::Degenerate {
                context: format!("Gram-Schmidt collapse at row {i}"),
            });
        }
        for v in row.iter_mut() {
            *v /= norm;
        }
    }
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Tensor::from_vec(data, &[dim, dim])
}

/// Builds a static configuration that clips every layer's input at the
/// `p`-th magnitude percentile of its unquantized calibration distribution,
/// leaving weights unquantized. Clipping at percentile `p` makes each
/// layer's clipping probability roughly `1 - p / 100`, which is the knob the
/// variance probes need.
pub fn calibrate_activation_percentiles(
    net: &ToyNet,
    calibration: &Tensor,
    p: f64,
) -> Result<Vec<LayerScalars>> {
    let unquantized = net.clone().with_quant_mode(QuantMode::None)?;
    let cache = unquantized.forward(calibration)?;
    let mut sets = Vec::with_capacity(net.layer_count());
    for l in 0..net.layer_count() {
        let x = cache.activation_input(l);
        let view = GroupView::for_shape(x.shape(), Granularity::PerTensor)?;
        let set = percentile_magnitude(x, view, p)?;
        if set.is_degenerate(0) {
            return Err(Error::Degenerate {
                context: format!("calibration input of layer {l} is all zeros"),
            });
        }
        sets.push(LayerScalars { weight: None, activation: Some(set.scalars()[0]) });
    }
    Ok(sets)
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = reduce_sum(values) / n;
    pairwise_map_sum(values, |v| {
        let d = v - mean;
        d * d
    }) / n
}
