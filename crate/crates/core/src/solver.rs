//! OCTAV: Newton-Raphson iteration for the MSE-optimal clipping scalar.
//!
//! One step maps the current scalar `s` to
//! `sum(|x| ; |x| > s) / (c * #{0 < |x| <= s} + #{|x| > s})` with `c` the
//! spec's MSE coefficient, which equals the Newton update `s - J'(s)/J''(s)`
//! of the clipped-quantization noise model. Exact zeros never count toward
//! the discretization term. The driver broadcasts the recursion over scaling
//! groups and records a full iterate trace.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::Histogram;
use crate::quantizer::{QuantSpec, ScalarSet};
use crate::tensor::{pairwise_map_sum, GroupView, Tensor};

/// Starting point for the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OctavInit {
    /// Mean magnitude of the nonzero elements; the default, and exactly the
    /// value of the third iterate when starting from the maximum.
    MeanAbsNonzero,
    /// A fixed positive starting scalar, shared by every group.
    FromValue(f64),
    /// Each group's maximum magnitude.
    MaxScalar,
    /// `k` times the group's population standard deviation.
    StdMultiple(f64),
}

/// Iteration budget and initialization for [`octav`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OctavConfig {
    /// Number of steps to run; the recursion is not stopped early.
    pub iterations: usize,
    pub init: OctavInit,
    /// Relative tolerance used only to report the `converged` diagnostic.
    pub convergence_tol: f64,
}

impl Default for OctavConfig {
    fn default() -> Self {
        Self {
            iterations: 10,
            init: OctavInit::MeanAbsNonzero,
            convergence_tol: 1e-3,
        }
    }
}

impl OctavConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter {
                reason: "iteration budget must be at least 1".to_string(),
            });
        }
        match self.init {
            OctavInit::FromValue(s1) if !(s1.is_finite() && s1 > 0.0) => {
                Err(Error::InvalidParameter {
                    reason: format!("initial scalar must be positive and finite, got {s1}"),
                })
            }
            OctavInit::StdMultiple(k) if !(k.is_finite() && k > 0.0) => {
                Err(Error::InvalidParameter {
                    reason: format!("std multiple must be positive and finite, got {k}"),
                })
            }
            _ => Ok(()),
        }
    }
}

/// Per-group iterate history and convergence diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OctavTrace {
    /// Post-clamp iterates `s_1..s_(n+1)` per group; empty for degenerate
    /// groups.
    pub iterates: Vec<Vec<f64>>,
    /// Whether the last two iterates agree within the configured relative
    /// tolerance. Always false for degenerate groups.
    pub converged: Vec<bool>,
    /// Groups whose elements are all zero.
    pub degenerate: Vec<bool>,
}

impl OctavTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// One Newton step of the recursion on a single group's raw values.
///
/// Accepts `s >= 0`; at `s = 0` the step returns the mean nonzero magnitude,
/// which makes it double as the default initializer. A step may return 0
/// when nothing exceeds `s` (the caller decides how to continue); an all-zero
/// group also returns 0.
pub fn octav_step(values: &[f64], s: f64, spec: QuantSpec) -> f64 {
    let c = spec.mse_coefficient();
    let mut in_range = 0u64;
    let mut clipped = 0u64;
    for &x in values {
        let m = x.abs();
        if m == 0.0 {
            continue;
        }
        if m > s {
            clipped += 1;
        } else {
            in_range += 1;
        }
    }
    let num = pairwise_map_sum(values, |x| {
        let m = x.abs();
        if m > s {
            m
        } else {
            0.0
        }
    });
    let den = c * in_range as f64 + clipped as f64;
    if den == 0.0 {
        // Only possible when every element is zero.
        debug_assert!(in_range == 0 && clipped == 0);
        return 0.0;
    }
    num / den
}

/// Runs the recursion per group for exactly `cfg.iterations` steps.
///
/// Iterates that fall below `1e-12` of the group maximum (including the
/// exact-zero step produced by an empty clipping set) are clamped to the
/// group's smallest nonzero magnitude so the recursion stays in domain; the
/// trace records post-clamp values. All-zero groups come back as scalar 0
/// with the degenerate flag set.
pub fn octav(
    t: &Tensor,
    view: GroupView,
    spec: QuantSpec,
    cfg: &OctavConfig,
) -> Result<(ScalarSet, OctavTrace)> {
    cfg.validate()?;
    view.check_matches(t)?;

    let groups = view.group_count();
    let mut scalars = vec![0.0f64; groups];
    let mut degenerate = vec![false; groups];
    let mut iterates: Vec<Vec<f64>> = vec![Vec::new(); groups];
    let mut converged = vec![false; groups];

    for g in 0..groups {
        let values = view.collect_group(t, g);
        let stats = GroupStats::measure(&values);
        if stats.max_mag == 0.0 {
            degenerate[g] = true;
            continue;
        }
        let floor = 1e-12 * stats.max_mag;
        let clamp = |s: f64| if s < floor { stats.min_nonzero_mag } else { s };

        let mut s = clamp(initial_scalar(&values, &stats, cfg.init, spec));
        let trace = &mut iterates[g];
        trace.push(s);
        for _ in 0..cfg.iterations {
            s = clamp(octav_step(&values, s, spec));
            trace.push(s);
        }

        let last = trace[trace.len() - 1];
        let prev = trace[trace.len() - 2];
        converged[g] = (last - prev).abs() <= cfg.convergence_tol * prev;
        scalars[g] = last;
    }

    let set = ScalarSet::with_degenerate(scalars, degenerate.clone(), view)?;
    let trace = OctavTrace {
        iterates,
        converged,
        degenerate,
    };
    Ok((set, trace))
}

struct GroupStats {
    max_mag: f64,
    /// Smallest nonzero magnitude; 0 when the group is all zeros.
    min_nonzero_mag: f64,
}

impl GroupStats {
    fn measure(values: &[f64]) -> Self {
        let mut max_mag = 0.0f64;
        let mut min_nonzero = f64::INFINITY;
        for &x in values {
            let m = x.abs();
            max_mag = max_mag.max(m);
            if m > 0.0 {
                min_nonzero = min_nonzero.min(m);
            }
        }
        Self {
            max_mag,
            min_nonzero_mag: if min_nonzero.is_finite() {
                min_nonzero
            } else {
                0.0
            },
        }
    }
}

fn initial_scalar(values: &[f64], stats: &GroupStats, init: OctavInit, spec: QuantSpec) -> f64 {
    match init {
        // Identical to one raw step from 0, bit for bit.
        OctavInit::MeanAbsNonzero => octav_step(values, 0.0, spec),
        OctavInit::FromValue(s1) => s1,
        OctavInit::MaxScalar => stats.max_mag,
        OctavInit::StdMultiple(k) => {
            let n = values.len() as f64;
            let mean = pairwise_map_sum(values, |x| x) / n;
            let var = pairwise_map_sum(values, |x| {
                let d = x - mean;
                d * d
            }) / n;
            k * var.sqrt()
        }
    }
}

/// First and second derivatives of the model MSE at `s`, evaluated on a
/// histogram with the same mass splitting as `analytical_mse`:
/// `J' = 2 c s P(|X|<=s) + 2 E[(s - |X|) ; |X| > s]` and
/// `J'' = 2 c P(|X|<=s) + 2 P(|X|>s)`. `J''` is strictly positive whenever
/// the histogram has mass, and one Newton step `s - J'/J''` reproduces
/// [`octav_step`] on a histogram that represents the data exactly.
pub fn mse_derivatives(h: &Histogram, s: f64, spec: QuantSpec) -> (f64, f64) {
    let c = spec.mse_coefficient();
    let split = h.split_at(s);
    let j1 = (2.0 * c * s * split.below - 2.0 * split.excess) / split.total;
    let j2 = (2.0 * c * split.below + 2.0 * split.above) / split.total;
    (j1, j2)
}
