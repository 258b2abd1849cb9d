//! Uniform quantizers and their clipping-scalar sets.
//!
//! The clipped signed quantizer maps `x` to
//! `clip(s * 2^(1-B) * round(x * 2^(B-1) / s), -s, s)`; the unsigned variant
//! uses step `s * 2^-B` on nonnegative data. Max-scaled quantization is the
//! same grid with `s` set to the group's maximum magnitude, so nothing clips.
//! Rounding is round-half-away-from-zero throughout.

use crate::error::{Error, Result};
use crate::tensor::{GroupView, Tensor};

/// Whether the level grid is symmetric about zero or one-sided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signedness {
    Signed,
    /// Nonnegative data only; the grid covers `[0, s]` with step `s * 2^-B`,
    /// half the signed step at equal bit width.
    Unsigned,
}

/// How the top of the signed grid is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Both `-s` and `+s` are attainable levels (2^B + 1 levels).
    Mathematical,
    /// Integer codes limited to `[-2^(B-1), 2^(B-1) - 1]`, as a two's
    /// complement register would hold; the largest positive level is
    /// `s * (2^(B-1) - 1) * 2^(1-B)`. Unsigned grids are unaffected.
    TwosComplement,
}

/// Tie-breaking rule for the rounding stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundingMode {
    /// Ties round away from zero (the behavior of `f64::round`).
    HalfAwayFromZero,
}

/// Complete description of a quantization grid, minus the clipping scalar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantSpec {
    bits: u32,
    signedness: Signedness,
    boundary: BoundaryMode,
    rounding: RoundingMode,
}

impl QuantSpec {
    /// Builds a spec with the default mathematical boundary and
    /// half-away-from-zero rounding. Bit widths 2..=16 are supported.
    pub fn new(bits: u32, signedness: Signedness) -> Result<Self> {
        if !(2..=16).contains(&bits) {
            return Err(Error::InvalidBits { bits });
        }
        Ok(Self {
            bits,
            signedness,
            boundary: BoundaryMode::Mathematical,
            rounding: RoundingMode::HalfAwayFromZero,
        })
    }

    /// Same spec with a different boundary mode.
    #[must_use]
    pub fn with_boundary(mut self, boundary: BoundaryMode) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn signedness(&self) -> Signedness {
        self.signedness
    }

    pub fn boundary(&self) -> BoundaryMode {
        self.boundary
    }

    pub fn rounding(&self) -> RoundingMode {
        self.rounding
    }

    /// Grid step for clipping scalar `s`: `s * 2^(1-B)` signed, `s * 2^-B`
    /// unsigned.
    pub fn step(&self, s: f64) -> f64 {
        match self.signedness {
            Signedness::Signed => s * exp2i(1 - self.bits as i32),
            Signedness::Unsigned => s * exp2i(-(self.bits as i32)),
        }
    }

    /// Coefficient of the additive-noise model: the modeled in-range MSE is
    /// `coefficient * s^2 * P(in range)`. Signed grids give `4^-B / 3`,
    /// unsigned `4^-B / 12` (the unsigned step is half the signed one).
    pub fn mse_coefficient(&self) -> f64 {
        let four_pow = exp2i(-2 * self.bits as i32);
        match self.signedness {
            Signedness::Signed => four_pow / 3.0,
            Signedness::Unsigned => four_pow / 12.0,
        }
    }

    /// Integer code range and scale factors for clipping scalar `s`.
    pub(crate) fn grid(&self, s: f64) -> Grid {
        match self.signedness {
            Signedness::Signed => {
                let half_levels = exp2i(self.bits as i32 - 1);
                let qmax = match self.boundary {
                    BoundaryMode::Mathematical => half_levels,
                    BoundaryMode::TwosComplement => half_levels - 1.0,
                };
                Grid {
                    to_code: half_levels,
                    step: s * exp2i(1 - self.bits as i32),
                    qmin: -half_levels,
                    qmax,
                }
            }
            Signedness::Unsigned => {
                let levels = exp2i(self.bits as i32);
                Grid {
                    to_code: levels,
                    step: s * exp2i(-(self.bits as i32)),
                    qmin: 0.0,
                    qmax: levels,
                }
            }
        }
    }
}

/// Exact power of two as f64.
fn exp2i(e: i32) -> f64 {
    (2.0f64).powi(e)
}

pub(crate) struct Grid {
    /// Multiplier taking `x / s` to code space.
    to_code: f64,
    step: f64,
    qmin: f64,
    qmax: f64,
}

impl Grid {
    /// Quantizes one element against clipping scalar `s`.
    #[inline]
    pub(crate) fn apply(&self, x: f64, s: f64) -> f64 {
        let code = (x * self.to_code / s).round();
        code.clamp(self.qmin, self.qmax) * self.step
    }
}

/// Per-group clipping scalars paired with the view that defines the groups.
///
/// Non-degenerate scalars are finite and strictly positive. A degenerate
/// group (one whose data is entirely zero) carries scalar 0 and a flag;
/// quantizing it passes the zeros through.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSet {
    scalars: Vec<f64>,
    degenerate: Vec<bool>,
    view: GroupView,
}

impl ScalarSet {
    /// Builds a set where every group is non-degenerate.
    pub fn new(scalars: Vec<f64>, view: GroupView) -> Result<Self> {
        let degenerate = vec![false; scalars.len()];
        Self::with_degenerate(scalars, degenerate, view)
    }

    /// Builds a set with explicit degenerate flags. Degenerate scalars are
    /// normalized to 0.
    pub fn with_degenerate(
        mut scalars: Vec<f64>,
        degenerate: Vec<bool>,
        view: GroupView,
    ) -> Result<Self> {
        if scalars.len() != view.group_count() || degenerate.len() != view.group_count() {
            return Err(Error::ScalarCountMismatch {
                scalars: scalars.len(),
                groups: view.group_count(),
            });
        }
        for (g, (&s, &d)) in scalars.iter().zip(&degenerate).enumerate() {
            if d {
                continue;
            }
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::NonPositiveScalar { group: g, value: s });
            }
        }
        for (s, &d) in scalars.iter_mut().zip(&degenerate) {
            if d {
                *s = 0.0;
            }
        }
        Ok(Self {
            scalars,
            degenerate,
            view,
        })
    }

    /// One positive scalar shared by every group of the view.
    pub fn uniform(value: f64, view: GroupView) -> Result<Self> {
        Self::new(vec![value; view.group_count()], view)
    }

    pub fn scalars(&self) -> &[f64] {
        &self.scalars
    }

    pub fn degenerate_flags(&self) -> &[bool] {
        &self.degenerate
    }

    pub fn is_degenerate(&self, group: usize) -> bool {
        self.degenerate[group]
    }

    /// True when any group is degenerate.
    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }

    pub fn view(&self) -> &GroupView {
        &self.view
    }

    pub fn group_count(&self) -> usize {
        self.scalars.len()
    }
}

/// Maximum magnitude per group; the scaling used by max-scaled quantization.
///
/// An all-zero group yields scalar 0 flagged degenerate.
pub fn max_scalar(t: &Tensor, view: GroupView) -> Result<ScalarSet> {
    view.check_matches(t)?;
    let mut maxima = vec![0.0f64; view.group_count()];
    view.for_each_run(t, |g, _, run| {
        let mut m = maxima[g];
        for &x in run {
            m = m.max(x.abs());
        }
        maxima[g] = m;
    });
    let degenerate: Vec<bool> = maxima.iter().map(|&m| m == 0.0).collect();
    ScalarSet::with_degenerate(maxima, degenerate, view)
}

/// Quantizes a tensor against per-group clipping scalars.
///
/// Every output lies on the group's level grid and inside the clipping range;
/// degenerate groups pass their zeros through. Unsigned specs reject negative
/// inputs.
pub fn quantize_clipped(t: &Tensor, s: &ScalarSet, spec: QuantSpec) -> Result<Tensor> {
    s.view().check_matches(t)?;
    let mut out = vec![0.0f64; t.len()];
    let mut negative_at: Option<usize> = None;
    let unsigned = spec.signedness() == Signedness::Unsigned;

    s.view().for_each_run(t, |g, start, run| {
        if negative_at.is_some() {
            return;
        }
        if unsigned {
            if let Some(off) = run.iter().position(|&x| x < 0.0) {
                negative_at = Some(start + off);
                return;
            }
        }
        if s.is_degenerate(g) {
            // All-zero group: outputs stay zero.
            return;
        }
        let scalar = s.scalars()[g];
        let grid = spec.grid(scalar);
        for (off, &x) in run.iter().enumerate() {
            out[start + off] = grid.apply(x, scalar);
        }
    });

    if let Some(index) = negative_at {
        return Err(Error::NegativeUnsigned { index });
    }
    Tensor::from_vec(out, t.shape())
}

/// Max-scaled quantization: grid pinned to each group's maximum magnitude.
///
/// In mathematical boundary mode no element is clipped, so every error is
/// pure discretization, at most half a step.
pub fn quantize_max_scaled(
    t: &Tensor,
    view: GroupView,
    spec: QuantSpec,
) -> Result<(Tensor, ScalarSet)> {
    let scalars = max_scalar(t, view)?;
    let q = quantize_clipped(t, &scalars, spec)?;
    Ok((q, scalars))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{group_view, Granularity};

    fn spec(bits: u32, signedness: Signedness) -> QuantSpec {
        QuantSpec::new(bits, signedness).unwrap()
    }

    fn quantize_scalar(x: f64, s: f64, q: QuantSpec) -> f64 {
        let t = Tensor::from_slice(&[x]).unwrap();
        let view = group_view(&t, Granularity::PerTensor).unwrap();
        let set = ScalarSet::uniform(s, view).unwrap();
        quantize_clipped(&t, &set, q).unwrap().data()[0]
    }

    #[test]
    fn bits_outside_range_are_rejected() {
        assert!(QuantSpec::new(1, Signedness::Signed).is_err());
        assert!(QuantSpec::new(17, Signedness::Signed).is_err());
        assert!(QuantSpec::new(2, Signedness::Signed).is_ok());
        assert!(QuantSpec::new(16, Signedness::Signed).is_ok());
    }

    #[test]
    fn two_bit_signed_examples() {
        let q = spec(2, Signedness::Signed);
        assert_eq!(quantize_scalar(0.6, 1.0, q), 0.5);
        assert_eq!(quantize_scalar(1.7, 1.0, q), 1.0); // clipped to s
        assert_eq!(quantize_scalar(-1.7, 1.0, q), -1.0);
        assert_eq!(quantize_scalar(0.0, 1.0, q), 0.0);
    }

    #[test]
    fn twos_complement_caps_positive_level() {
        let q = spec(2, Signedness::Signed).with_boundary(BoundaryMode::TwosComplement);
        // Codes are -2..=1, so the largest positive level is s/2.
        assert_eq!(quantize_scalar(1.7, 1.0, q), 0.5);
        assert_eq!(quantize_scalar(-1.7, 1.0, q), -1.0);
    }

    #[test]
    fn unsigned_grid_examples() {
        let q = spec(2, Signedness::Unsigned);
        assert_eq!(quantize_scalar(0.6, 1.0, q), 0.5);
        assert_eq!(quantize_scalar(1.2, 1.0, q), 1.0);
        assert_eq!(quantize_scalar(0.0, 1.0, q), 0.0);
    }

    #[test]
    fn unsigned_rejects_negative_with_index() {
        let q = spec(4, Signedness::Unsigned);
        let t = Tensor::from_slice(&[0.5, 0.25, -0.1]).unwrap();
        let view = group_view(&t, Granularity::PerTensor).unwrap();
        let set = ScalarSet::uniform(1.0, view).unwrap();
        let err = quantize_clipped(&t, &set, q).unwrap_err();
        assert!(matches!(err, Error::NegativeUnsigned { index: 2 }));
    }

    #[test]
    fn unsigned_step_is_half_signed_step() {
        for bits in 2..=16 {
            let s = 0.7318;
            let signed = spec(bits, Signedness::Signed).step(s);
            let unsigned = spec(bits, Signedness::Unsigned).step(s);
            assert_eq!(unsigned * 2.0, signed);
        }
    }

    #[test]
    fn max_scalar_examples() {
        let t = Tensor::from_slice(&[-3.0, 1.0, 2.0]).unwrap();
        let view = group_view(&t, Granularity::PerTensor).unwrap();
        assert_eq!(max_scalar(&t, view).unwrap().scalars(), &[3.0]);

        let m = Tensor::from_vec(vec![1.0, 2.0, 3.0, 8.0], &[2, 2]).unwrap();
        let rows = group_view(&m, Granularity::PerRow(0)).unwrap();
        assert_eq!(max_scalar(&m, rows).unwrap().scalars(), &[2.0, 8.0]);
    }

    #[test]
    fn all_zero_group_is_degenerate_and_passes_through() {
        let t = Tensor::from_vec(vec![0.0, 0.0, 1.0, -2.0], &[2, 2]).unwrap();
        let rows = group_view(&t, Granularity::PerRow(0)).unwrap();
        let set = max_scalar(&t, rows).unwrap();
        assert!(set.is_degenerate(0));
        assert!(!set.is_degenerate(1));
        assert_eq!(set.scalars()[0], 0.0);

        let q = quantize_clipped(&t, &set, spec(4, Signedness::Signed)).unwrap();
        assert_eq!(&q.data()[..2], &[0.0, 0.0]);
    }

    #[test]
    fn max_scaled_never_clips_in_mathematical_mode() {
        let q = spec(4, Signedness::Signed);
        let data: Vec<f64> = (0..2048)
            .map(|i| ((i * 2654435761u64 as usize) % 4093) as f64 / 409.3 - 5.0)
            .collect();
        let t = Tensor::from_slice(&data).unwrap();
        let view = group_view(&t, Granularity::PerTensor).unwrap();
        let (qt, set) = quantize_max_scaled(&t, view, q).unwrap();
        let half_step = q.step(set.scalars()[0]) / 2.0;
        for (qx, x) in qt.data().iter().zip(t.data()) {
            assert!(
                (qx - x).abs() <= half_step + 1e-15,
                "max-scaled error exceeded half a step: q={qx} x={x}"
            );
        }
    }

    #[test]
    fn scalar_set_rejects_non_positive_scalars() {
        let view = GroupView::for_shape(&[4], Granularity::PerTensor).unwrap();
        let err = ScalarSet::new(vec![0.0], view).unwrap_err();
        assert!(matches!(err, Error::NonPositiveScalar { group: 0, .. }));
        let err = ScalarSet::new(vec![-1.0], view).unwrap_err();
        assert!(matches!(err, Error::NonPositiveScalar { group: 0, .. }));
    }

    #[test]
    fn scalar_set_length_must_match_view() {
        let view = GroupView::for_shape(&[2, 3], Granularity::PerRow(0)).unwrap();
        let err = ScalarSet::new(vec![1.0], view).unwrap_err();
        assert!(matches!(
            err,
            Error::ScalarCountMismatch {
                scalars: 1,
                groups: 2
            }
        ));
    }

    #[test]
    fn per_row_groups_quantize_independently() {
        let t = Tensor::from_vec(vec![0.6, -0.3, 6.0, -3.0], &[2, 2]).unwrap();
        let rows = group_view(&t, Granularity::PerRow(0)).unwrap();
        let set = ScalarSet::new(vec![1.0, 10.0], rows).unwrap();
        let q = quantize_clipped(&t, &set, spec(2, Signedness::Signed)).unwrap();
        assert_eq!(q.data(), &[0.5, -0.5, 5.0, -5.0]);
    }
}
