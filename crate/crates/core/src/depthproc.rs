//! Range normalizations for depth maps and images.
//!
//! Raw metric depth spans half a meter to two kilometers, far too wide a
//! range to regress directly. Three normalizations are offered:
//!
//! * [`histogram_equalize`]: rank-based remap onto `[0, 1]`, flattening the
//!   value distribution.
//! * [`log_transform`]: natural log with a floor, compressing far ranges.
//! * [`standardize`]: zero-mean unit-variance shift using statistics of the
//!   raster itself (channels pooled).
//!
//! All three are monotone non-decreasing in the input values, so ordering
//! information survives whichever is picked.

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Remaps samples to `[0, 1]` by normalized rank.
///
/// Each sample receives its rank divided by `n - 1`; runs of equal values
/// all receive the mean of the ranks they occupy, so ties stay tied. A
/// raster with only one distinct value maps to all 0.5.
pub fn histogram_equalize(raster: &Raster) -> Result<Raster> {
    let n = raster.len();
    let samples = raster.samples();

    let mut order: Vec<usize> = (0..n).collect();
    // Finiteness is a Raster invariant, so total ordering is safe.
    order.sort_by(|&a, &b| samples[a].partial_cmp(&samples[b]).unwrap());

    let all_equal = samples[order[0]] == samples[order[n - 1]];
    let mut out = vec![0.0f64; n];
    if all_equal {
        out.iter_mut().for_each(|v| *v = 0.5);
    } else {
        let denom = (n - 1) as f64;
        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && samples[order[end]] == samples[order[start]] {
                end += 1;
            }
            // Positions start..end hold one tied run; share the mean rank.
            let mean_rank = (start + end - 1) as f64 / 2.0;
            for &i in &order[start..end] {
                out[i] = mean_rank / denom;
            }
            start = end;
        }
    }
    Raster::from_vec(raster.width(), raster.height(), raster.channels(), out)
}

/// Natural log of each sample after flooring at `min_depth`.
///
/// The floor keeps values at or below zero out of the log; `min_depth` must
/// be positive.
pub fn log_transform(raster: &Raster, min_depth: f64) -> Result<Raster> {
    if !(min_depth.is_finite() && min_depth > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "log floor must be positive, got {min_depth}"
        )));
    }
    raster.map(|v| v.max(min_depth).ln())
}

/// Shifts and scales to zero mean and unit variance, pooling all channels.
///
/// Uses the population standard deviation; `epsilon` guards the division so
/// a constant raster comes back as all zeros rather than NaN.
pub fn standardize(raster: &Raster, epsilon: f64) -> Result<Raster> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let n = raster.len() as f64;
    let samples = raster.samples();
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let scale = 1.0 / var.sqrt().max(epsilon);
    raster.map(|v| (v - mean) * scale)
}
