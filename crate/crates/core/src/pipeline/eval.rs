//! Scoring a trained model against a dataset: forward each standardized RGB,
//! exponentiate the predicted log depth back to meters, and accumulate the
//! error metrics across all frames. Assumes the checkpoint was trained
//! against log-depth targets; relative-depth modes have no meters to score.

use crate::depthproc::standardize;
use crate::error::Result;
use crate::exec;
use crate::metrics::{aggregate, evaluate, MetricsReport};
use crate::nnet::{model_forward, ModelParams};
use crate::render::{FAR_CLIP, NEAR_CLIP};

use super::dataset::DatasetManifest;
use super::train::{batch_tensor, fit_target, plane_to_raster, STANDARDIZE_EPS};

use crate::raster::Raster;

/// Runs the model on one RGB frame and returns the raw log-depth plane, at
/// 1/4, 1/2 or full input resolution depending on the model's upscale
/// factor. Standardizes the input exactly as training did.
pub fn predict_log_depth(params: &ModelParams, rgb: &Raster) -> Result<Raster> {
    let x = batch_tensor(&[&standardize(rgb, STANDARDIZE_EPS)?])?;
    let (out, _) = model_forward(params, &x)?;
    plane_to_raster(&out, 0)
}

/// Evaluates every frame in the manifest and merges the per-image reports.
/// Predictions are clamped to the camera's measurable range before scoring,
/// mirroring what the renderer itself can produce.
pub fn evaluate_checkpoint(
    params: &ModelParams,
    manifest: &DatasetManifest,
) -> Result<MetricsReport> {
    let upscale = params.dims().upscale;
    let reports: Vec<MetricsReport> = exec::try_map_indexed(manifest.len(), |i| {
        let (rgb, depth) = manifest.load_sample(i)?;
        let pred = predict_log_depth(params, &rgb)?.map(|v| v.exp().clamp(NEAR_CLIP, FAR_CLIP))?;
        let gt = fit_target(&depth, upscale)?;
        evaluate(&pred, &gt)
    })?;
    aggregate(&reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{init_params, ModelDims};
    use crate::pipeline::dataset::{generate_dataset, GenerateConfig};
    use crate::pipeline::train::{train, TrainConfig};
    use crate::scenegen::SceneConfig;
    use tempfile::tempdir;

    fn tiny_dims() -> ModelDims {
        ModelDims {
            channels: 4,
            blocks: 1,
            upscale: 4,
        }
    }

    fn tiny_dataset(dir: &std::path::Path, count: usize, seed: u64) -> DatasetManifest {
        let config = GenerateConfig {
            scene: SceneConfig {
                box_count: 2,
                sphere_count: 1,
                ..SceneConfig::default()
            },
            ..GenerateConfig::new(count, seed, 16, 16)
        };
        generate_dataset(&config, dir).unwrap()
    }

    #[test]
    fn same_checkpoint_and_data_give_identical_reports() {
        let dir = tempdir().unwrap();
        let manifest = tiny_dataset(dir.path(), 3, 41);
        let params = init_params(tiny_dims(), 8).unwrap();
        let a = evaluate_checkpoint(&params, &manifest).unwrap();
        let b = evaluate_checkpoint(&params, &manifest).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sample_count(), 3 * 16 * 16);
        assert!(a.rmse().is_finite() && a.rmse() >= 0.0);
    }

    #[test]
    fn training_beats_an_untrained_model_on_held_out_frames() {
        let train_dir = tempdir().unwrap();
        let eval_dir = tempdir().unwrap();
        tiny_dataset(train_dir.path(), 8, 51);
        let held_out = tiny_dataset(eval_dir.path(), 4, 52);
        let config = TrainConfig {
            epochs: 30,
            batch_size: 4,
            dims: tiny_dims(),
            seed: 9,
            ..TrainConfig::new(train_dir.path())
        };
        let outcome = train(&config, |_| {}).unwrap();
        let fresh = init_params(tiny_dims(), 9).unwrap();
        let before = evaluate_checkpoint(&fresh, &held_out).unwrap();
        let after = evaluate_checkpoint(&outcome.params, &held_out).unwrap();
        assert!(
            after.rmse_si() < before.rmse_si(),
            "rmse_si should improve: {} -> {}",
            before.rmse_si(),
            after.rmse_si()
        );
    }
}
