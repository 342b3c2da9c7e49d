//! The operational shell around the library: image file formats, dataset
//! generation and loading, augmentation, checkpoints, the training loop, and
//! evaluation runs. Everything here is deterministic given its seeds, so the
//! whole generate → train → eval chain reproduces bit-identically.

mod augment;
mod checkpoint;
mod dataset;
mod eval;
mod gradcheck;
mod io;
mod train;

pub use augment::{augment, apply_augment, sample_augment, AugmentDraw};
pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use dataset::{generate_dataset, DatasetManifest, GenerateConfig, ManifestRecord};
pub use eval::{evaluate_checkpoint, predict_log_depth};
pub use gradcheck::{loss_gradient_errors, model_gradient_error};
pub use io::{read_pfm, read_ppm, write_pfm, write_ppm};
pub use train::{
    format_log_entry, train, LossLogEntry, NormalizationMode, TrainConfig, TrainOutcome,
    STANDARDIZE_EPS,
};
