//! Quantization-noise analysis: empirical MSE, histogram-based analytical
//! MSE and its derivatives, brute-force clipping-scalar sweeps, percentile
//! statistics, and local-minima diagnostics.
//!
//! The analytical model splits the error at clipping scalar `s` into a
//! discretization term `c * s^2 * P(|X| <= s)` (with `c` the spec's MSE
//! coefficient) and a clipping term `E[(s - |X|)^2 ; |X| > s]`, both
//! integrated over a magnitude histogram that excludes exact zeros. The
//! empirical path quantizes for real and averages squared errors over all
//! elements, zeros included; the two are compared on their shared argmin,
//! not their absolute levels.

use std::io::Write as IoWrite;

use crate::error::{Error, Result};
use crate::quantizer::{max_scalar, QuantSpec, ScalarSet, Signedness};
use crate::tensor::{pairwise_map_sum, GroupView, Tensor};

/// Default histogram resolution. Fine enough to resolve 8-bit grids at the
/// scalar ratios that occur in practice.
pub const DEFAULT_BINS: usize = 4096;

/// Which estimator produced an MSE curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Quantize every element and average squared errors.
    Empirical,
    /// Integrate the noise model over a magnitude histogram.
    Analytical,
}

/// Equal-width magnitude histogram over `[0, hi]` with exact zeros excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    hi: f64,
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    /// Builds a histogram from raw values, binning `|x|` and skipping zeros.
    /// Values must be finite.
    pub fn from_values(values: &[f64], bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidParameter {
                reason: format!("histogram needs at least 2 bins, got {bins}"),
            });
        }
        let mut hi = 0.0f64;
        for &x in values {
            hi = hi.max(x.abs());
        }
        if hi == 0.0 {
            return Err(Error::Degenerate {
                context: "histogram of all-zero data".to_string(),
            });
        }
        let mut counts = vec![0u64; bins];
        let mut total = 0u64;
        let scale = bins as f64 / hi;
        for &x in values {
            let m = x.abs();
            if m == 0.0 {
                continue;
            }
            // The maximum lands in the top bin, not one past it.
            let idx = ((m * scale) as usize).min(bins - 1);
            counts[idx] += 1;
            total += 1;
        }
        Ok(Self { hi, counts, total })
    }

    /// Builds a histogram from explicit counts over `[0, hi]`. Used when the
    /// binning must align exactly with externally constructed data.
    pub fn from_parts(hi: f64, counts: Vec<u64>) -> Result<Self> {
        if !(hi.is_finite() && hi > 0.0) {
            return Err(Error::InvalidParameter {
                reason: format!("histogram upper edge must be positive and finite, got {hi}"),
            });
        }
        if counts.len() < 2 {
            return Err(Error::InvalidParameter {
                reason: format!("histogram needs at least 2 bins, got {}", counts.len()),
            });
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Degenerate {
                context: "histogram with zero total mass".to_string(),
            });
        }
        Ok(Self { hi, counts, total })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Count of nonzero elements binned.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn bin_width(&self) -> f64 {
        self.hi / self.counts.len() as f64
    }

    /// Bin boundaries, `bins + 1` ascending values from 0 to `hi`.
    pub fn edges(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..=self.counts.len()).map(|i| i as f64 * w).collect()
    }

    /// Mean of `|X| * 1{|X| > s}` over the histogram, the clipping-side
    /// expectation that drives the fixed-point update.
    pub fn clipped_mean_magnitude(&self, s: f64) -> f64 {
        let split = self.split_at(s);
        (split.excess + s * split.above) / split.total
    }

    /// Splits the mass at clipping scalar `s` into the pieces the noise
    /// model needs. Bins straddling `s` are divided by linear mass
    /// interpolation, with each piece treated as a point mass at its center.
    pub(crate) fn split_at(&self, s: f64) -> MassSplit {
        let w = self.bin_width();
        let mut below = 0.0f64;
        let mut above = 0.0f64;
        let mut clip_sq = 0.0f64;
        let mut excess = 0.0f64;
        for (i, &n) in self.counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let n = n as f64;
            let lo = i as f64 * w;
            let hi = if i + 1 == self.counts.len() {
                self.hi
            } else {
                (i + 1) as f64 * w
            };
            if hi <= s {
                below += n;
            } else if lo >= s {
                let mid = 0.5 * (lo + hi);
                above += n;
                clip_sq += n * (s - mid) * (s - mid);
                excess += n * (mid - s);
            } else {
                let frac_above = (hi - s) / (hi - lo);
                let mass_above = n * frac_above;
                let centroid = 0.5 * (s + hi);
                below += n - mass_above;
                above += mass_above;
                clip_sq += mass_above * (s - centroid) * (s - centroid);
                excess += mass_above * (centroid - s);
            }
        }
        MassSplit {
            below,
            above,
            clip_sq,
            excess,
            total: self.total as f64,
        }
    }
}

/// Mass decomposition at a clipping scalar, in element counts.
pub(crate) struct MassSplit {
    pub(crate) below: f64,
    pub(crate) above: f64,
    /// `sum (s - mid)^2 * count` over the clipped mass.
    pub(crate) clip_sq: f64,
    /// `sum (mid - s) * count` over the clipped mass.
    pub(crate) excess: f64,
    pub(crate) total: f64,
}

/// Histogram of a whole tensor's magnitudes. Unsigned specs reject negative
/// elements.
pub fn build_histogram(t: &Tensor, bins: usize, signedness: Signedness) -> Result<Histogram> {
    if signedness == Signedness::Unsigned {
        if let Some(index) = t.data().iter().position(|&x| x < 0.0) {
            return Err(Error::NegativeUnsigned { index });
        }
    }
    Histogram::from_values(t.data(), bins)
}

/// Model MSE at clipping scalar `s`, integrated over the histogram:
/// `c * s^2 * P(|X| <= s)` plus the clipped mass's `(s - mid)^2` average.
/// Normalization is per nonzero element, matching the histogram's zero
/// exclusion.
pub fn analytical_mse(h: &Histogram, s: f64, spec: QuantSpec) -> f64 {
    let c = spec.mse_coefficient();
    let split = h.split_at(s);
    (c * s * s * split.below + split.clip_sq) / split.total
}

/// Per-group mean squared quantization error at the given scalars, averaged
/// over all group elements (zeros included). Degenerate groups score 0.
pub fn empirical_mse(t: &Tensor, s: &ScalarSet, spec: QuantSpec) -> Result<Vec<f64>> {
    s.view().check_matches(t)?;
    let view = s.view();
    let mut sums = vec![0.0f64; view.group_count()];
    let mut negative_at: Option<usize> = None;
    let unsigned = spec.signedness() == Signedness::Unsigned;

    view.for_each_run(t, |g, start, run| {
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
            return;
        }
        let scalar = s.scalars()[g];
        let grid = spec.grid(scalar);
        sums[g] += pairwise_map_sum(run, |x| {
            let e = grid.apply(x, scalar) - x;
            e * e
        });
    });

    if let Some(index) = negative_at {
        return Err(Error::NegativeUnsigned { index });
    }
    let group_len = view.group_size() as f64;
    Ok(sums.into_iter().map(|sum| sum / group_len).collect())
}

/// One group's MSE-vs-scalar curve from a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MseCurve {
    scalars: Vec<f64>,
    mse: Vec<f64>,
    source: SweepMode,
}

impl MseCurve {
    pub fn new(scalars: Vec<f64>, mse: Vec<f64>, source: SweepMode) -> Result<Self> {
        if scalars.len() != mse.len() {
            return Err(Error::InvalidParameter {
                reason: format!(
                    "curve lengths differ: {} scalars, {} mse values",
                    scalars.len(),
                    mse.len()
                ),
            });
        }
        if scalars.is_empty() {
            return Err(Error::InvalidParameter {
                reason: "empty curve".to_string(),
            });
        }
        let ascending = scalars.windows(2).all(|w| w[0] < w[1]);
        if !(ascending && scalars[0] > 0.0) {
            return Err(Error::InvalidParameter {
                reason: "curve scalars must be positive and strictly increasing".to_string(),
            });
        }
        if mse.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(Error::InvalidParameter {
                reason: "curve mse values must be nonnegative".to_string(),
            });
        }
        Ok(Self {
            scalars,
            mse,
            source,
        })
    }

    pub fn scalars(&self) -> &[f64] {
        &self.scalars
    }

    pub fn mse(&self) -> &[f64] {
        &self.mse
    }

    pub fn source(&self) -> SweepMode {
        self.source
    }

    pub fn len(&self) -> usize {
        self.scalars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalars.is_empty()
    }

    /// Index of the smallest MSE; ties resolve to the smallest scalar.
    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.mse.iter().enumerate() {
            if v < self.mse[best] {
                best = i;
            }
        }
        best
    }

    /// Scalar at the argmin.
    pub fn best_scalar(&self) -> f64 {
        self.scalars[self.argmin()]
    }

    /// Writes `scalar,mse` CSV rows with a header line.
    pub fn write_csv<W: IoWrite>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scalar,mse")?;
        for (s, m) in self.scalars.iter().zip(&self.mse) {
            writeln!(w, "{s},{m}")?;
        }
        Ok(())
    }
}

/// Brute-force MSE curve per group over the grid `k / points * s_max` for
/// `k = 1..=points`, where `s_max` is each group's own maximum magnitude.
/// All-zero groups are an error; a sweep cannot rank scalars for them.
pub fn sweep(
    t: &Tensor,
    view: GroupView,
    spec: QuantSpec,
    points: usize,
    mode: SweepMode,
) -> Result<Vec<MseCurve>> {
    if points < 2 {
        return Err(Error::InvalidParameter {
            reason: format!("sweep needs at least 2 points, got {points}"),
        });
    }
    let maxima = max_scalar(t, view)?;
    if let Some(g) = maxima.degenerate_flags().iter().position(|&d| d) {
        return Err(Error::Degenerate {
            context: format!("sweep over all-zero group {g}"),
        });
    }

    let groups = view.group_count();
    let mut mse_per_group: Vec<Vec<f64>> = vec![Vec::with_capacity(points); groups];

    match mode {
        SweepMode::Empirical => {
            for k in 1..=points {
                let frac = k as f64 / points as f64;
                let scalars: Vec<f64> =
                    maxima.scalars().iter().map(|&m| frac * m).collect();
                let set = ScalarSet::new(scalars, view)?;
                let step_mse = empirical_mse(t, &set, spec)?;
                for (g, v) in step_mse.into_iter().enumerate() {
                    mse_per_group[g].push(v);
                }
            }
        }
        SweepMode::Analytical => {
            for (g, group_mse) in mse_per_group.iter_mut().enumerate() {
                let values = view.collect_group(t, g);
                let hist = Histogram::from_values(&values, DEFAULT_BINS)?;
                let s_max = maxima.scalars()[g];
                for k in 1..=points {
                    let s = k as f64 / points as f64 * s_max;
                    group_mse.push(analytical_mse(&hist, s, spec));
                }
            }
        }
    }

    let mut curves = Vec::with_capacity(groups);
    for (g, mse) in mse_per_group.into_iter().enumerate() {
        let s_max = maxima.scalars()[g];
        let scalars: Vec<f64> = (1..=points)
            .map(|k| k as f64 / points as f64 * s_max)
            .collect();
        curves.push(MseCurve::new(scalars, mse, mode)?);
    }
    Ok(curves)
}

/// Indices of local minima: interior points strictly below their left
/// neighbor and not above their right; endpoints use the one-sided test.
pub fn local_minima(curve: &MseCurve) -> Vec<usize> {
    let m = curve.mse();
    let n = m.len();
    if n < 3 {
        return Vec::new();
    }
    let mut out = Vec::new();
    if m[0] <= m[1] {
        out.push(0);
    }
    for i in 1..n - 1 {
        if m[i] < m[i - 1] && m[i] <= m[i + 1] {
            out.push(i);
        }
    }
    if m[n - 1] < m[n - 2] {
        out.push(n - 1);
    }
    out
}

/// Per-group p-th percentile of `|x|` (all elements, zeros included) by
/// linear interpolation between order statistics. `p = 100` equals
/// `max_scalar`. Groups whose percentile is 0 are flagged degenerate, since
/// no positive clipping scalar can be derived from them.
pub fn percentile_magnitude(t: &Tensor, view: GroupView, p: f64) -> Result<ScalarSet> {
    if !(p.is_finite() && p > 0.0 && p <= 100.0) {
        return Err(Error::InvalidParameter {
            reason: format!("percentile must lie in (0, 100], got {p}"),
        });
    }
    view.check_matches(t)?;
    let mut scalars = Vec::with_capacity(view.group_count());
    let mut degenerate = Vec::with_capacity(view.group_count());
    for g in 0..view.group_count() {
        let mut mags = view.collect_group(t, g);
        for m in &mut mags {
            *m = m.abs();
        }
        mags.sort_by(|a, b| a.partial_cmp(b).expect("finite magnitudes"));
        let n = mags.len();
        let rank = p / 100.0 * (n - 1) as f64;
        let lo = rank.floor() as usize;
        let value = if lo + 1 >= n {
            mags[n - 1]
        } else {
            let frac = rank - lo as f64;
            mags[lo] + frac * (mags[lo + 1] - mags[lo])
        };
        degenerate.push(value == 0.0);
        scalars.push(value);
    }
    ScalarSet::with_degenerate(scalars, degenerate, view)
}
