//! Backward rules for fake quantization: STE, PWL, and MAD, plus the MPH
//! policy that pairs MAD on weights with PWL on activations.
//!
//! All three rules agree (derivative 1) inside the clipping range, boundary
//! included; they differ only on clipped elements: STE passes the gradient
//! unchanged, PWL zeroes it, MAD attenuates it by `s / |x|`, the same factor
//! by which clipping shrinks the element itself.

use crate::error::Result;
use crate::quantizer::{quantize_clipped, QuantSpec, ScalarSet, Signedness};
use crate::tensor::Tensor;

/// A backward rule for the clipped quantizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// Straight-through: derivative 1 everywhere.
    Ste,
    /// Piece-wise linear: derivative 1 inside the range, 0 outside.
    Pwl,
    /// Magnitude-aware: derivative 1 inside, `s / |x|` outside; continuous.
    Mad,
}

impl EstimatorKind {
    /// Upper-case display name, as used in CLI flags and reports.
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Ste => "STE",
            EstimatorKind::Pwl => "PWL",
            EstimatorKind::Mad => "MAD",
        }
    }
}

/// Estimator assignment split by tensor role. The default pairs MAD on
/// weights with PWL on activations (the hybrid that keeps weight gradients
/// alive without amplifying activation-gradient variance).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MphPolicy {
    pub weight_rule: EstimatorKind,
    pub activation_rule: EstimatorKind,
}

impl Default for MphPolicy {
    fn default() -> Self {
        Self {
            weight_rule: EstimatorKind::Mad,
            activation_rule: EstimatorKind::Pwl,
        }
    }
}

/// Attenuation factor of the clipping operator: 1 in range, `s / |x|`
/// beyond it (unsigned grids test plain `x`). Multiplying `x` by it
/// reproduces the clip, which is what makes MAD "magnitude-aware".
pub fn attenuation(x: f64, s: f64, signedness: Signedness) -> f64 {
    let m = magnitude(x, signedness);
    if m <= s {
        1.0
    } else {
        s / m
    }
}

/// The clipping operator written as `attenuation(x) * x`, evaluated as
/// `s * signum(x)` on the clipped branch so the product is bit-exact: the
/// real-number identity `(s / |x|) * x == s * sign(x)` would pick up two
/// rounding errors if evaluated literally in floating point.
pub fn attenuate(x: f64, s: f64, signedness: Signedness) -> f64 {
    match signedness {
        Signedness::Signed => {
            if x.abs() <= s {
                x
            } else {
                s * x.signum()
            }
        }
        Signedness::Unsigned => {
            if x <= s {
                x
            } else {
                s
            }
        }
    }
}

/// Element-wise backward factor under the given rule. The boundary
/// `|x| = s` sits on the in-range branch (factor 1) for every rule, which
/// also makes MAD continuous there; MAD at `x = 0` is 1 by the same branch.
pub fn backward(x: f64, s: f64, kind: EstimatorKind, signedness: Signedness) -> f64 {
    match kind {
        EstimatorKind::Ste => 1.0,
        EstimatorKind::Pwl => {
            if magnitude(x, signedness) <= s {
                1.0
            } else {
                0.0
            }
        }
        EstimatorKind::Mad => attenuation(x, s, signedness),
    }
}

fn magnitude(x: f64, signedness: Signedness) -> f64 {
    match signedness {
        Signedness::Signed => x.abs(),
        Signedness::Unsigned => x,
    }
}

/// Quantized forward pass paired with the materialized backward mask.
///
/// The forward tensor is exactly `quantize_clipped`; the mask holds
/// `backward(x, s_group, kind)` per element, ready to be multiplied into an
/// upstream gradient. Degenerate (all-zero) groups get mask 1: zero is in
/// range for every rule.
pub fn fake_quant(
    t: &Tensor,
    s: &ScalarSet,
    spec: QuantSpec,
    kind: EstimatorKind,
) -> Result<(Tensor, Tensor)> {
    let forward = quantize_clipped(t, s, spec)?;
    let mut mask = vec![1.0f64; t.len()];
    if kind != EstimatorKind::Ste {
        s.view().for_each_run(t, |g, start, run| {
            if s.is_degenerate(g) {
                return;
            }
            let scalar = s.scalars()[g];
            for (off, &x) in run.iter().enumerate() {
                mask[start + off] = backward(x, scalar, kind, spec.signedness());
            }
        });
    }
    let mask = Tensor::from_vec(mask, t.shape())?;
    Ok((forward, mask))
}
