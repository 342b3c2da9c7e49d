//! Depth evaluation metrics: RMSE, log RMSE, scale-invariant RMSE, and the
//! absolute / squared relative errors.
//!
//! A [`MetricsReport`] stores the underlying error accumulators rather than
//! final ratios, so reports from separate images can be merged; aggregating
//! per-image reports then matches a single evaluation over the concatenated
//! pixels, including for the RMS metrics where the square root must come
//! last. The scale-invariant term is the variance of the log-depth
//! difference, kept as a running mean and centered second moment (Welford)
//! instead of raw sums: the naive `mean(D^2) - mean(D)^2` cancels
//! catastrophically when the prediction is off by a large global scale.

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Error accumulators from one or more evaluated depth maps. All metric
/// accessors are non-negative. Construct via [`evaluate`] or [`aggregate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pixels: u64,
    sum_sq_err: f64,
    sum_sq_log_err: f64,
    mean_log_diff: f64,
    m2_log_diff: f64,
    sum_abs_rel: f64,
    sum_sq_rel: f64,
}

impl MetricsReport {
    /// Root mean squared error in meters.
    pub fn rmse(&self) -> f64 {
        (self.sum_sq_err / self.pixels as f64).sqrt()
    }

    /// Root mean squared error between log depths.
    pub fn rmse_log(&self) -> f64 {
        (self.sum_sq_log_err / self.pixels as f64).sqrt()
    }

    /// Scale-invariant RMSE: the root of the variance of the log-depth
    /// difference `D` (equivalently `mean(D^2) - mean(D)^2`). Immune to any
    /// global scaling of the prediction, since that only shifts `D` by a
    /// constant.
    pub fn rmse_si(&self) -> f64 {
        (self.m2_log_diff / self.pixels as f64).max(0.0).sqrt()
    }

    /// Mean of `|pred - gt| / gt`.
    pub fn absrel(&self) -> f64 {
        self.sum_abs_rel / self.pixels as f64
    }

    /// Mean of `(pred - gt)^2 / gt`.
    pub fn sqrrel(&self) -> f64 {
        self.sum_sq_rel / self.pixels as f64
    }

    /// Number of pixels these accumulators cover.
    pub fn sample_count(&self) -> u64 {
        self.pixels
    }
}

/// Scores a predicted depth map against ground truth. Both rasters must be
/// single-channel, the same shape, and strictly positive everywhere (depth
/// in meters).
pub fn evaluate(pred: &Raster, gt: &Raster) -> Result<MetricsReport> {
    if !pred.same_shape(gt) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{} vs ground truth {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    if pred.channels() != 1 {
        return Err(Error::ShapeMismatch(
            "depth metrics need single-channel rasters".into(),
        ));
    }

    let mut report = MetricsReport {
        pixels: 0,
        sum_sq_err: 0.0,
        sum_sq_log_err: 0.0,
        mean_log_diff: 0.0,
        m2_log_diff: 0.0,
        sum_abs_rel: 0.0,
        sum_sq_rel: 0.0,
    };
    for (&p, &g) in pred.samples().iter().zip(gt.samples()) {
        if p <= 0.0 || g <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "depth must be positive to evaluate, got pred {p}, gt {g}"
            )));
        }
        let err = p - g;
        let log_diff = p.ln() - g.ln();
        report.pixels += 1;
        report.sum_sq_err += err * err;
        report.sum_sq_log_err += log_diff * log_diff;
        let delta = log_diff - report.mean_log_diff;
        report.mean_log_diff += delta / report.pixels as f64;
        report.m2_log_diff += delta * (log_diff - report.mean_log_diff);
        report.sum_abs_rel += err.abs() / g;
        report.sum_sq_rel += err * err / g;
    }
    Ok(report)
}

/// Merges per-image reports into one, as if all their pixels had been
/// evaluated together. Fails on an empty list.
pub fn aggregate(reports: &[MetricsReport]) -> Result<MetricsReport> {
    let mut iter = reports.iter();
    let mut combined = *iter
        .next()
        .ok_or_else(|| Error::InvalidConfig("cannot aggregate zero reports".into()))?;
    for r in iter {
        let total = combined.pixels + r.pixels;
        let delta = r.mean_log_diff - combined.mean_log_diff;
        let weight = r.pixels as f64 / total as f64;
        combined.m2_log_diff +=
            r.m2_log_diff + delta * delta * weight * combined.pixels as f64;
        combined.mean_log_diff += delta * weight;
        combined.pixels = total;
        combined.sum_sq_err += r.sum_sq_err;
        combined.sum_sq_log_err += r.sum_sq_log_err;
        combined.sum_abs_rel += r.sum_abs_rel;
        combined.sum_sq_rel += r.sum_sq_rel;
    }
    Ok(combined)
}
