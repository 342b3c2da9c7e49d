//! Training objectives over log-depth rasters, with analytic gradients.
//!
//! Everything here works on the per-pixel log difference
//! `D = log_pred - log_gt`. The scale-invariant loss scores depth up to a
//! global multiplicative factor (an additive constant in log space cancels);
//! it exists in two deliberately separate forms, the O(n^2) pairwise
//! definition ([`si_loss_pairwise`]) and the O(n) simplified one
//! ([`si_loss`]), so each can check the other. The multi-scale total
//! variation loss ([`tv_loss`]) penalizes gradients of `D` at a pyramid of
//! resolutions, encouraging predictions whose structure, not just values,
//! matches the ground truth. [`finite_diff_check`] verifies any loss's
//! analytic gradient against central differences.

use crate::error::{Error, Result};
use crate::exec::try_map_indexed;
use crate::raster::Raster;

/// A loss value and its gradient with respect to the log prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub grad: Raster,
}

fn check_pair(log_pred: &Raster, log_gt: &Raster) -> Result<()> {
    if !log_pred.same_shape(log_gt) {
        return Err(Error::ShapeMismatch(format!(
            "prediction {}x{}x{} vs ground truth {}x{}x{}",
            log_pred.width(),
            log_pred.height(),
            log_pred.channels(),
            log_gt.width(),
            log_gt.height(),
            log_gt.channels()
        )));
    }
    if log_pred.channels() != 1 {
        return Err(Error::ShapeMismatch(
            "losses operate on single-channel log-depth rasters".into(),
        ));
    }
    Ok(())
}

/// Scale-invariant loss by its pairwise definition:
/// `(1 / 2n^2) * sum_ij ((p_i - p_j) - (g_i - g_j))^2`.
///
/// Quadratic in the pixel count; kept as an independent cross-check for
/// [`si_loss`]. Summation is compensated so the value stays trustworthy at
/// full 16x16 size.
pub fn si_loss_pairwise(log_pred: &Raster, log_gt: &Raster) -> Result<f64> {
    check_pair(log_pred, log_gt)?;
    let p = log_pred.samples();
    let g = log_gt.samples();
    let n = p.len();

    // Neumaier compensated sum: the n^2 terms would otherwise accumulate
    // enough rounding to drift past the identity tolerance.
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let term = {
                let d = (p[i] - p[j]) - (g[i] - g[j]);
                d * d
            };
            let t = sum + term;
            comp += if sum.abs() >= term.abs() {
                (sum - t) + term
            } else {
                (term - t) + sum
            };
            sum = t;
        }
    }
    Ok((sum + comp) / (2.0 * (n * n) as f64))
}

/// Scale-invariant loss, simplified form:
/// `mean(D^2) - mean(D)^2` with gradient `(2/n) * (D_i - mean(D))`.
///
/// Algebraically identical to [`si_loss_pairwise`] but linear in the pixel
/// count. The value is clamped at zero to absorb the tiny negative results
/// floating-point cancellation can produce when `D` is nearly constant.
pub fn si_loss(log_pred: &Raster, log_gt: &Raster) -> Result<LossResult> {
    check_pair(log_pred, log_gt)?;
    let p = log_pred.samples();
    let g = log_gt.samples();
    let n = p.len() as f64;

    let mut sum_d = 0.0f64;
    let mut sum_d2 = 0.0f64;
    for (pi, gi) in p.iter().zip(g) {
        let d = pi - gi;
        sum_d += d;
        sum_d2 += d * d;
    }
    let mean = sum_d / n;
    let value = (sum_d2 / n - mean * mean).max(0.0);

    let grad: Vec<f64> = p
        .iter()
        .zip(g)
        .map(|(pi, gi)| (2.0 / n) * ((pi - gi) - mean))
        .collect();
    Ok(LossResult {
        value,
        grad: Raster::from_vec(log_pred.width(), log_pred.height(), 1, grad)?,
    })
}

/// 2x2 average pooling; an odd trailing row or column is dropped.
pub fn downsample_half(raster: &Raster) -> Result<Raster> {
    let (w, h, c) = (raster.width(), raster.height(), raster.channels());
    if w < 2 || h < 2 {
        return Err(Error::InvalidConfig(format!(
            "cannot halve a {w}x{h} raster; both dimensions must be at least 2"
        )));
    }
    let (ow, oh) = (w / 2, h / 2);
    Raster::from_fn(ow, oh, c, |x, y, ch| {
        (raster.get(2 * x, 2 * y, ch)
            + raster.get(2 * x + 1, 2 * y, ch)
            + raster.get(2 * x, 2 * y + 1, ch)
            + raster.get(2 * x + 1, 2 * y + 1, ch))
            / 4.0
    })
}

/// Dimensions of each pyramid level, failing if any level drops under 2x2.
fn pyramid_dims(w: usize, h: usize, num_scales: usize) -> Result<Vec<(usize, usize)>> {
    if num_scales == 0 {
        return Err(Error::InvalidConfig("need at least one scale".into()));
    }
    let mut dims = Vec::with_capacity(num_scales);
    let (mut cw, mut ch) = (w, h);
    for s in 0..num_scales {
        if cw < 2 || ch < 2 {
            return Err(Error::InvalidConfig(format!(
                "{num_scales} scales need a larger raster: {w}x{h} shrinks below 2x2 at scale {s}"
            )));
        }
        dims.push((cw, ch));
        cw /= 2;
        ch /= 2;
    }
    Ok(dims)
}

/// Gradient-magnitude (total variation) value and gradient at one scale.
///
/// Forward differences over valid positions, normalized by the full pixel
/// count of the level (not the difference count).
fn tv_level(d: &Raster) -> (f64, Raster) {
    let (w, h) = (d.width(), d.height());
    let n = (w * h) as f64;
    let mut value = 0.0f64;
    let mut grad = Raster::filled(w, h, 1, 0.0).expect("level dims already validated");
    for y in 0..h {
        for x in 0..w {
            let here = d.get(x, y, 0);
            if x + 1 < w {
                let dx = d.get(x + 1, y, 0) - here;
                value += dx * dx;
                let g = 2.0 * dx / n;
                grad.set(x + 1, y, 0, grad.get(x + 1, y, 0) + g);
                grad.set(x, y, 0, grad.get(x, y, 0) - g);
            }
            if y + 1 < h {
                let dy = d.get(x, y + 1, 0) - here;
                value += dy * dy;
                let g = 2.0 * dy / n;
                grad.set(x, y + 1, 0, grad.get(x, y + 1, 0) + g);
                grad.set(x, y, 0, grad.get(x, y, 0) - g);
            }
        }
    }
    (value / n, grad)
}

/// Spreads a coarse-level gradient back to the finer level: each coarse cell
/// contributed the mean of its 2x2 block, so each fine cell receives a
/// quarter of the coarse gradient. Rows/columns dropped by the pooling get
/// nothing.
fn upsample_quarter(coarse: &Raster, fine_w: usize, fine_h: usize) -> Raster {
    let mut fine = Raster::filled(fine_w, fine_h, 1, 0.0).expect("fine dims already validated");
    for y in 0..coarse.height() {
        for x in 0..coarse.width() {
            let share = coarse.get(x, y, 0) / 4.0;
            for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                fine.set(2 * x + dx, 2 * y + dy, 0, share);
            }
        }
    }
    fine
}

/// Multi-scale total variation of `D = log_pred - log_gt`.
///
/// Builds a pyramid by repeated 2x2 average pooling of `D`, sums the
/// per-level gradient energies, and backpropagates exactly through the
/// pooling chain.
pub fn tv_loss(log_pred: &Raster, log_gt: &Raster, num_scales: usize) -> Result<LossResult> {
    check_pair(log_pred, log_gt)?;
    let (w, h) = (log_pred.width(), log_pred.height());
    pyramid_dims(w, h, num_scales)?;

    let d_values: Vec<f64> = log_pred
        .samples()
        .iter()
        .zip(log_gt.samples())
        .map(|(p, g)| p - g)
        .collect();
    let mut level = Raster::from_vec(w, h, 1, d_values)?;

    let mut total = 0.0f64;
    let mut level_grads: Vec<Raster> = Vec::with_capacity(num_scales);
    let mut level_dims: Vec<(usize, usize)> = Vec::with_capacity(num_scales);
    for s in 0..num_scales {
        let (value, grad) = tv_level(&level);
        total += value;
        level_dims.push((level.width(), level.height()));
        level_grads.push(grad);
        if s + 1 < num_scales {
            level = downsample_half(&level)?;
        }
    }

    // Collapse the pyramid: push each coarse gradient up one level and fold
    // it into the gradient computed there.
    let mut grad = level_grads.pop().expect("at least one scale");
    while let Some(mut finer) = level_grads.pop() {
        let (fw, fh) = level_dims[level_grads.len()];
        let lifted = upsample_quarter(&grad, fw, fh);
        for (g, l) in finer.samples_mut().iter_mut().zip(lifted.samples()) {
            *g += l;
        }
        grad = finer;
    }

    Ok(LossResult { value: total, grad })
}

/// Combined objective: scale-invariant term plus `alpha` times the
/// multi-scale total variation term.
pub fn total_loss(
    log_pred: &Raster,
    log_gt: &Raster,
    alpha: f64,
    num_scales: usize,
) -> Result<LossResult> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "smoothness weight must be non-negative, got {alpha}"
        )));
    }
    let si = si_loss(log_pred, log_gt)?;
    let tv = tv_loss(log_pred, log_gt, num_scales)?;
    let grad: Vec<f64> = si
        .grad
        .samples()
        .iter()
        .zip(tv.grad.samples())
        .map(|(s, t)| s + alpha * t)
        .collect();
    Ok(LossResult {
        value: si.value + alpha * tv.value,
        grad: Raster::from_vec(log_pred.width(), log_pred.height(), 1, grad)?,
    })
}

/// Compares a loss's analytic gradient against central finite differences
/// (step 1e-6) and returns the worst relative error over all coordinates:
/// `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(loss: F, log_pred: &Raster, log_gt: &Raster) -> Result<f64>
where
    F: Fn(&Raster, &Raster) -> Result<LossResult> + Sync,
{
    const H: f64 = 1e-6;
    let analytic = loss(log_pred, log_gt)?;
    let base = log_pred.samples().to_vec();

    let errors = try_map_indexed(base.len(), |i| -> Result<f64> {
        let mut bumped = base.clone();
        bumped[i] = base[i] + H;
        let plus = loss(
            &Raster::from_vec(log_pred.width(), log_pred.height(), 1, bumped.clone())?,
            log_gt,
        )?
        .value;
        bumped[i] = base[i] - H;
        let minus = loss(
            &Raster::from_vec(log_pred.width(), log_pred.height(), 1, bumped)?,
            log_gt,
        )?
        .value;
        let numeric = (plus - minus) / (2.0 * H);
        let a = analytic.grad.samples()[i];
        Ok((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8))
    })?;
    Ok(errors.into_iter().fold(0.0, f64::max))
}
