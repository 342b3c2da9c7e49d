//! The training loop: standardized RGB in, normalized depth targets out,
//! shuffled mini-batches, the combined scale-invariant + smoothness
//! objective, and ADAM with a stepped learning-rate decay. Every run is a
//! pure function of its config — shuffling, initialization, and arithmetic
//! order are all pinned — so a seed reproduces the loss log bit for bit.

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::depthproc::{histogram_equalize, log_transform, standardize};
use crate::error::{Error, Result};
use crate::exec;
use crate::nnet::{
    adam_step, init_params, lr_schedule, model_backward, model_forward, ModelDims, ModelParams,
    OptState, Tensor4,
};
use crate::objectives::{downsample_half, si_loss, tv_loss};
use crate::raster::Raster;
use crate::render::NEAR_CLIP;

use super::dataset::DatasetManifest;

/// Epsilon guarding standardization against near-constant rasters.
pub const STANDARDIZE_EPS: f64 = 1e-8;

/// Keeps the shuffle stream distinct from the init stream, which consumes
/// the raw seed inside `init_params`.
const SHUFFLE_SEED_OFFSET: u64 = 0x517C_C1B7_2722_0A95;

/// Which normalization produces the depth targets the network learns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalizationMode {
    /// Natural log of metric depth, floored at the near clip. The default:
    /// predictions exponentiate back to meters.
    Log,
    /// Rank-based relative depth in `[0, 1]`.
    HistEq,
    /// Per-image zero-mean/unit-variance depth.
    Standardize,
}

impl std::str::FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<NormalizationMode> {
        match s {
            "log" => Ok(NormalizationMode::Log),
            "histeq" => Ok(NormalizationMode::HistEq),
            "standardize" => Ok(NormalizationMode::Standardize),
            other => Err(Error::InvalidConfig(format!(
                "unknown normalization mode {other:?}; use log, histeq or standardize"
            ))),
        }
    }
}

impl std::fmt::Display for NormalizationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormalizationMode::Log => "log",
            NormalizationMode::HistEq => "histeq",
            NormalizationMode::Standardize => "standardize",
        })
    }
}

/// Everything a training run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub data_dir: PathBuf,
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    /// Iterations between learning-rate decays (each multiplies by 0.65).
    pub decay_every: u64,
    /// Weight of the smoothness term in the combined loss.
    pub alpha: f64,
    pub num_scales: usize,
    pub dims: ModelDims,
    pub seed: u64,
    pub mode: NormalizationMode,
}

impl TrainConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> TrainConfig {
        TrainConfig {
            data_dir: data_dir.into(),
            epochs: 50,
            batch_size: 16,
            base_lr: 4e-4,
            decay_every: 200,
            alpha: 0.5,
            num_scales: 3,
            dims: ModelDims::default(),
            seed: 0,
            mode: NormalizationMode::Log,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !self.base_lr.is_finite() || self.base_lr < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and non-negative, got {}",
                self.base_lr
            )));
        }
        if self.decay_every == 0 {
            return Err(Error::InvalidConfig("decay interval must be positive".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha
            )));
        }
        if self.num_scales == 0 {
            return Err(Error::InvalidConfig("need at least one scale".into()));
        }
        self.dims.validate()
    }
}

/// One line of the loss log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossLogEntry {
    /// 1-based count of completed optimizer steps.
    pub iteration: u64,
    /// Learning rate used for this step.
    pub lr: f64,
    /// Batch-mean scale-invariant term, before the step.
    pub si: f64,
    /// Batch-mean smoothness term, before the step.
    pub tv: f64,
    /// `si + alpha * tv`.
    pub total: f64,
}

/// Renders one log entry as the plain-text line the CLI emits.
pub fn format_log_entry(e: &LossLogEntry) -> String {
    format!(
        "iteration={} lr={:e} L_SI={:.12e} L_TV={:.12e} L_Total={:.12e}",
        e.iteration, e.lr, e.si, e.tv, e.total
    )
}

/// A finished run: final parameters, steps taken, and the full loss log.
pub struct TrainOutcome {
    pub params: ModelParams,
    pub iterations: u64,
    pub log: Vec<LossLogEntry>,
}

/// Lays an interleaved RGB raster batch out as a planar `(N, 3, H, W)`
/// tensor.
pub(super) fn batch_tensor(rgbs: &[&Raster]) -> Result<Tensor4> {
    let first = rgbs.first().ok_or_else(|| {
        Error::InvalidConfig("cannot build a tensor from an empty batch".into())
    })?;
    let (w, h) = (first.width(), first.height());
    let mut t = Tensor4::zeros(rgbs.len(), 3, h, w);
    for (n, rgb) in rgbs.iter().enumerate() {
        if rgb.width() != w || rgb.height() != h || rgb.channels() != 3 {
            return Err(Error::ShapeMismatch(format!(
                "batch member {n} is {}x{}x{}, expected {w}x{h}x3",
                rgb.width(),
                rgb.height(),
                rgb.channels()
            )));
        }
        for c in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    t.set(n, c, y, x, rgb.get(x, y, c));
                }
            }
        }
    }
    Ok(t)
}

/// Extracts batch member `n` of a single-channel `(N, 1, H, W)` tensor as a
/// raster.
pub(super) fn plane_to_raster(t: &Tensor4, n: usize) -> Result<Raster> {
    let (_, c, h, w) = t.dims();
    if c != 1 {
        return Err(Error::ShapeMismatch(format!(
            "expected a single-channel tensor, got {c} channels"
        )));
    }
    Raster::from_vec(w, h, 1, t.data()[t.idx(n, 0, 0, 0)..=t.idx(n, 0, h - 1, w - 1)].to_vec())
}

/// Pools a full-resolution target down to the model's output resolution:
/// the network emits `input / 4 * upscale`, so upscale 4 is full size,
/// 2 is half, and 1 is a quarter.
pub(super) fn fit_target(target: &Raster, upscale: usize) -> Result<Raster> {
    let halvings = match upscale {
        4 => 0,
        2 => 1,
        1 => 2,
        other => {
            return Err(Error::InvalidConfig(format!(
                "upscale factor {other} is not 1, 2 or 4"
            )))
        }
    };
    let mut out = target.clone();
    for _ in 0..halvings {
        out = downsample_half(&out)?;
    }
    Ok(out)
}

/// Loads every sample, standardizes RGB, and builds loss targets in the
/// configured normalization, pooled to the model's output resolution.
fn prepare_samples(
    manifest: &DatasetManifest,
    config: &TrainConfig,
) -> Result<Vec<(Raster, Raster)>> {
    exec::try_map_indexed(manifest.len(), |i| {
        let (rgb, depth) = manifest.load_sample(i)?;
        let rgb = standardize(&rgb, STANDARDIZE_EPS)?;
        let target = match config.mode {
            NormalizationMode::Log => log_transform(&depth, NEAR_CLIP)?,
            NormalizationMode::HistEq => histogram_equalize(&depth)?,
            NormalizationMode::Standardize => standardize(&depth, STANDARDIZE_EPS)?,
        };
        Ok((rgb, fit_target(&target, config.dims.upscale)?))
    })
}

/// Runs the full loop, invoking `observer` after every optimizer step.
pub fn train(
    config: &TrainConfig,
    mut observer: impl FnMut(&LossLogEntry),
) -> Result<TrainOutcome> {
    config.validate()?;
    let manifest = DatasetManifest::load(&config.data_dir)?;
    let samples = prepare_samples(&manifest, config)?;

    let mut params = init_params(config.dims, config.seed)?;
    let mut opt = OptState::new(config.dims.param_count(), config.base_lr)?;
    let mut shuffle_rng =
        ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(SHUFFLE_SEED_OFFSET));
    let mut iteration: u64 = 0;
    let mut log = Vec::new();

    for _ in 0..config.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&Raster> = chunk.iter().map(|&i| &samples[i].0).collect();
            let x = batch_tensor(&batch)?;
            let (out, cache) = model_forward(&params, &x)?;

            let k = chunk.len() as f64;
            let (_, _, oh, ow) = out.dims();
            let mut g_out = Tensor4::zeros(chunk.len(), 1, oh, ow);
            let mut si_sum = 0.0;
            let mut tv_sum = 0.0;
            for (slot, &sample) in chunk.iter().enumerate() {
                let pred = plane_to_raster(&out, slot)?;
                let target = &samples[sample].1;
                let si = si_loss(&pred, target)?;
                let tv = tv_loss(&pred, target, config.num_scales)?;
                si_sum += si.value;
                tv_sum += tv.value;
                let base = g_out.idx(slot, 0, 0, 0);
                let plane = &mut g_out.data_mut()[base..base + oh * ow];
                for ((g, &s), &t) in plane
                    .iter_mut()
                    .zip(si.grad.samples())
                    .zip(tv.grad.samples())
                {
                    *g = (s + config.alpha * t) / k;
                }
            }
            let si_mean = si_sum / k;
            let tv_mean = tv_sum / k;
            let total = si_mean + config.alpha * tv_mean;
            if !total.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss diverged at iteration {}: L_SI {si_mean}, L_TV {tv_mean}",
                    iteration + 1
                )));
            }

            let grads = model_backward(&params, &cache, &g_out)?;
            opt.lr = lr_schedule(config.base_lr, iteration, config.decay_every)?;
            adam_step(&mut params, &grads, &mut opt)?;
            iteration += 1;

            let entry = LossLogEntry {
                iteration,
                lr: opt.lr,
                si: si_mean,
                tv: tv_mean,
                total,
            };
            observer(&entry);
            log.push(entry);
        }
    }

    Ok(TrainOutcome {
        params,
        iterations: iteration,
        log,
    })
}
