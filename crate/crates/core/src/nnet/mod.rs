//! A small convolutional depth regressor with hand-written backprop.
//!
//! The pieces: an NCHW [`Tensor4`], 3x3 convolutions ([`conv_forward`],
//! [`conv_backward`]), the residual architecture and its exact gradients
//! ([`model_forward`], [`model_backward`]), subpixel upsampling
//! ([`pixel_shuffle`]), He initialization ([`init_params`]) and the ADAM
//! optimizer with its stepwise learning-rate decay.

mod adam;
mod conv;
mod model;
mod tensor;

pub use adam::{adam_step, lr_schedule, OptState};
pub use conv::{conv_backward, conv_forward, ConvSpec};
pub use model::{
    init_params, model_backward, model_forward, pixel_shuffle, pixel_unshuffle,
    residual_block_forward, ForwardCache, LayerSlot, ModelDims, ModelParams,
};
pub use tensor::Tensor4;
