//! The depth network: a strided stem, plain residual blocks, and a subpixel
//! (pixel-shuffle) head. No normalization layers anywhere; identity skips
//! carry the signal, which keeps activations on a stable scale even in
//! small-batch training.
//!
//! Layout, for input `(N, 3, H, W)` with `H` and `W` divisible by 4:
//!
//! ```text
//! stem   conv 3->C  3x3 stride 2          H/2
//! stem   conv C->C  3x3 stride 2          H/4
//! B x    residual block:
//!            y = x + conv2(relu(conv1(x)))    (convs C->C, stride 1)
//! head   conv C->r^2 3x3 stride 1
//! shuffle r                               H/4 * r
//! ```
//!
//! With the default upscale factor r = 4 the output is a 1-channel map at
//! the input resolution. The backward pass is hand-derived layer by layer
//! and reuses activations recorded in [`ForwardCache`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nnet::conv::{conv_backward, conv_forward, ConvSpec};
use crate::nnet::tensor::Tensor4;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Feature channels C throughout the trunk.
    pub channels: usize,
    /// Number of residual blocks B.
    pub blocks: usize,
    /// Pixel-shuffle upscale factor r (1, 2 or 4).
    pub upscale: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            channels: 16,
            blocks: 4,
            upscale: 4,
        }
    }
}

impl ModelDims {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::InvalidConfig("channel count must be positive".into()));
        }
        if ![1, 2, 4].contains(&self.upscale) {
            return Err(Error::InvalidConfig(format!(
                "upscale factor must be 1, 2 or 4, got {}",
                self.upscale
            )));
        }
        Ok(())
    }

    /// Conv layers in storage order: stem pair, block pairs, head.
    pub fn layer_specs(&self) -> Vec<ConvSpec> {
        let c = self.channels;
        let mut specs = vec![
            ConvSpec {
                in_c: 3,
                out_c: c,
                stride: 2,
            },
            ConvSpec {
                in_c: c,
                out_c: c,
                stride: 2,
            },
        ];
        for _ in 0..self.blocks {
            specs.push(ConvSpec {
                in_c: c,
                out_c: c,
                stride: 1,
            });
            specs.push(ConvSpec {
                in_c: c,
                out_c: c,
                stride: 1,
            });
        }
        specs.push(ConvSpec {
            in_c: c,
            out_c: self.upscale * self.upscale,
            stride: 1,
        });
        specs
    }

    /// Total scalar parameter count (weights plus biases).
    pub fn param_count(&self) -> usize {
        self.layer_specs()
            .iter()
            .map(|s| s.weight_len() + s.out_c)
            .sum()
    }
}

/// Where one layer's weights and bias live inside the flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct LayerSlot {
    pub spec: ConvSpec,
    pub weight_offset: usize,
    pub bias_offset: usize,
}

/// All parameters of one model, stored flat in layer order (each layer's
/// weights immediately followed by its bias). Flat storage keeps the
/// optimizer, checkpoints and finite-difference probes trivial.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dims: ModelDims,
    data: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(dims: ModelDims) -> Result<ModelParams> {
        dims.validate()?;
        Ok(ModelParams {
            data: vec![0.0; dims.param_count()],
            dims,
        })
    }

    pub fn from_flat(dims: ModelDims, data: Vec<f64>) -> Result<ModelParams> {
        dims.validate()?;
        if data.len() != dims.param_count() {
            return Err(Error::DimMismatch(format!(
                "{} parameters supplied, architecture needs {}",
                data.len(),
                dims.param_count()
            )));
        }
        Ok(ModelParams { dims, data })
    }

    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn flat(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Offsets of every layer, in storage order.
    pub fn slots(&self) -> Vec<LayerSlot> {
        let mut slots = Vec::new();
        let mut offset = 0;
        for spec in self.dims.layer_specs() {
            slots.push(LayerSlot {
                spec,
                weight_offset: offset,
                bias_offset: offset + spec.weight_len(),
            });
            offset += spec.weight_len() + spec.out_c;
        }
        slots
    }

    pub fn weight(&self, slot: &LayerSlot) -> &[f64] {
        &self.data[slot.weight_offset..slot.weight_offset + slot.spec.weight_len()]
    }

    pub fn bias(&self, slot: &LayerSlot) -> &[f64] {
        &self.data[slot.bias_offset..slot.bias_offset + slot.spec.out_c]
    }

    fn write_layer(&mut self, slot: &LayerSlot, g_weight: &[f64], g_bias: &[f64]) {
        self.data[slot.weight_offset..slot.weight_offset + g_weight.len()]
            .copy_from_slice(g_weight);
        self.data[slot.bias_offset..slot.bias_offset + g_bias.len()].copy_from_slice(g_bias);
    }
}

/// He-initialized parameters: every kernel weight is drawn from
/// `N(0, 2 / fan_in)` with `fan_in = in_c * 9`, and biases start at zero.
/// The draw order is fixed, so a seed fully determines the parameters.
pub fn init_params(dims: ModelDims, seed: u64) -> Result<ModelParams> {
    let mut params = ModelParams::zeros(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let slots = params.slots();
    for slot in slots {
        let fan_in = (slot.spec.in_c * 9) as f64;
        let normal = Normal::new(0.0, (2.0 / fan_in).sqrt())
            .expect("standard deviation is finite and positive");
        for i in 0..slot.spec.weight_len() {
            params.data[slot.weight_offset + i] = normal.sample(&mut rng);
        }
        // Biases stay zero.
    }
    Ok(params)
}

/// Rearranges `(N, C*r^2, H, W)` into `(N, C, H*r, W*r)`:
/// `out[c][y*r + dy][x*r + dx] = in[c*r^2 + dy*r + dx][y][x]`.
pub fn pixel_shuffle(x: &Tensor4, r: usize) -> Result<Tensor4> {
    if r == 0 {
        return Err(Error::InvalidConfig("upscale factor must be positive".into()));
    }
    let (n, c, h, w) = x.dims();
    if c % (r * r) != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{c} channels do not split into r^2 = {} groups",
            r * r
        )));
    }
    let oc = c / (r * r);
    let mut out = Tensor4::zeros(n, oc, h * r, w * r);
    for ni in 0..n {
        for co in 0..oc {
            for dy in 0..r {
                for dx in 0..r {
                    let ci = co * r * r + dy * r + dx;
                    for y in 0..h {
                        for x_ in 0..w {
                            out.set(ni, co, y * r + dy, x_ * r + dx, x.get(ni, ci, y, x_));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact inverse of [`pixel_shuffle`]: `(N, C, H*r, W*r)` back to
/// `(N, C*r^2, H, W)`.
pub fn pixel_unshuffle(x: &Tensor4, r: usize) -> Result<Tensor4> {
    if r == 0 {
        return Err(Error::InvalidConfig("upscale factor must be positive".into()));
    }
    let (n, c, h, w) = x.dims();
    if h % r != 0 || w % r != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{h}x{w} does not split into {r}x{r} cells"
        )));
    }
    let (oh, ow) = (h / r, w / r);
    let mut out = Tensor4::zeros(n, c * r * r, oh, ow);
    for ni in 0..n {
        for co in 0..c {
            for dy in 0..r {
                for dx in 0..r {
                    let ci = co * r * r + dy * r + dx;
                    for y in 0..oh {
                        for x_ in 0..ow {
                            out.set(ni, ci, y, x_, x.get(ni, co, y * r + dy, x_ * r + dx));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// One residual block: `x + conv2(relu(conv1(x)))`. Exposed for tests; the
/// full network uses it through [`model_forward`].
pub fn residual_block_forward(
    x: &Tensor4,
    conv1_w: &[f64],
    conv1_b: &[f64],
    conv2_w: &[f64],
    conv2_b: &[f64],
    spec: ConvSpec,
) -> Result<Tensor4> {
    let pre = conv_forward(x, conv1_w, conv1_b, spec)?;
    let post = pre.relu();
    let branch = conv_forward(&post, conv2_w, conv2_b, spec)?;
    x.add(&branch)
}

/// Activations recorded by [`model_forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Tensor4,
    stem1_out: Tensor4,
    stem2_out: Tensor4,
    /// Per block: conv1 pre-activation, its relu, and the block output.
    blocks: Vec<(Tensor4, Tensor4, Tensor4)>,
}

impl ForwardCache {
    fn head_input(&self) -> &Tensor4 {
        self.blocks.last().map(|(_, _, out)| out).unwrap_or(&self.stem2_out)
    }

    fn block_input(&self, i: usize) -> &Tensor4 {
        if i == 0 {
            &self.stem2_out
        } else {
            &self.blocks[i - 1].2
        }
    }
}

/// Runs the network on a batch `(N, 3, H, W)`; returns the predicted map
/// `(N, 1, H/4*r, W/4*r)` and the cache needed for [`model_backward`].
pub fn model_forward(params: &ModelParams, x: &Tensor4) -> Result<(Tensor4, ForwardCache)> {
    let (_, c, h, w) = x.dims();
    if c != 3 {
        return Err(Error::ShapeMismatch(format!(
            "model input must have 3 channels, got {c}"
        )));
    }
    if h % 4 != 0 || w % 4 != 0 || h < 4 || w < 4 {
        return Err(Error::ShapeMismatch(format!(
            "input extent must be a positive multiple of 4, got {h}x{w}"
        )));
    }

    let slots = params.slots();
    let stem1_out = conv_forward(x, params.weight(&slots[0]), params.bias(&slots[0]), slots[0].spec)?;
    let stem2_out = conv_forward(
        &stem1_out,
        params.weight(&slots[1]),
        params.bias(&slots[1]),
        slots[1].spec,
    )?;

    let blocks_n = params.dims().blocks;
    let mut blocks = Vec::with_capacity(blocks_n);
    let mut cur = stem2_out.clone();
    for b in 0..blocks_n {
        let s1 = &slots[2 + 2 * b];
        let s2 = &slots[3 + 2 * b];
        let pre = conv_forward(&cur, params.weight(s1), params.bias(s1), s1.spec)?;
        let post = pre.relu();
        let branch = conv_forward(&post, params.weight(s2), params.bias(s2), s2.spec)?;
        let out = cur.add(&branch)?;
        blocks.push((pre, post, out.clone()));
        cur = out;
    }

    let head = slots.last().expect("architecture always has a head layer");
    let head_out = conv_forward(&cur, params.weight(head), params.bias(head), head.spec)?;
    let output = pixel_shuffle(&head_out, params.dims().upscale)?;

    Ok((
        output,
        ForwardCache {
            input: x.clone(),
            stem1_out,
            stem2_out,
            blocks,
        },
    ))
}

/// Backpropagates `g_output` (gradient of a scalar loss with respect to the
/// model output) through the cached forward pass, returning parameter
/// gradients in the same flat layout as [`ModelParams`].
pub fn model_backward(
    params: &ModelParams,
    cache: &ForwardCache,
    g_output: &Tensor4,
) -> Result<ModelParams> {
    let mut grads = ModelParams::zeros(params.dims())?;
    let slots = params.slots();

    let mut g = pixel_unshuffle(g_output, params.dims().upscale)?;

    let head = slots.last().expect("architecture always has a head layer");
    let (g_w, g_b, g_in) = conv_backward(cache.head_input(), params.weight(head), head.spec, &g, true)?;
    grads.write_layer(head, &g_w, &g_b);
    g = g_in.expect("input gradient requested");

    for b in (0..params.dims().blocks).rev() {
        let s1 = &slots[2 + 2 * b];
        let s2 = &slots[3 + 2 * b];
        let (pre, post, _) = &cache.blocks[b];

        // Branch: conv2 sees the relu output.
        let (g_w2, g_b2, g_post) = conv_backward(post, params.weight(s2), s2.spec, &g, true)?;
        grads.write_layer(s2, &g_w2, &g_b2);
        let mut g_pre = g_post.expect("input gradient requested");
        // relu' with the dead-at-zero convention.
        for (gp, p) in g_pre.data_mut().iter_mut().zip(pre.data()) {
            if *p <= 0.0 {
                *gp = 0.0;
            }
        }
        let (g_w1, g_b1, g_branch_in) =
            conv_backward(cache.block_input(b), params.weight(s1), s1.spec, &g_pre, true)?;
        grads.write_layer(s1, &g_w1, &g_b1);

        // Skip connection adds the upstream gradient unchanged.
        g = g.add(&g_branch_in.expect("input gradient requested"))?;
    }

    let s1 = &slots[1];
    let (g_w, g_b, g_in) = conv_backward(&cache.stem1_out, params.weight(s1), s1.spec, &g, true)?;
    grads.write_layer(s1, &g_w, &g_b);
    g = g_in.expect("input gradient requested");

    let s0 = &slots[0];
    let (g_w, g_b, _) = conv_backward(&cache.input, params.weight(s0), s0.spec, &g, false)?;
    grads.write_layer(s0, &g_w, &g_b);

    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_input(seed: u64, n: usize, h: usize, w: usize) -> Tensor4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * 3 * h * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor4::from_vec(n, 3, h, w, data).unwrap()
    }

    #[test]
    fn param_count_matches_slot_layout() {
        let dims = ModelDims {
            channels: 8,
            blocks: 2,
            upscale: 4,
        };
        let params = ModelParams::zeros(dims).unwrap();
        let slots = params.slots();
        assert_eq!(slots.len(), 2 + 2 * 2 + 1);
        let last = slots.last().unwrap();
        assert_eq!(
            last.bias_offset + last.spec.out_c,
            dims.param_count()
        );
        // Hand count: stem 3*8*9+8 + 8*8*9+8, blocks 4x (8*8*9+8), head 8*16*9+16.
        let expected = (3 * 8 * 9 + 8) + (8 * 8 * 9 + 8) + 4 * (8 * 8 * 9 + 8) + (8 * 16 * 9 + 16);
        assert_eq!(dims.param_count(), expected);
    }

    #[test]
    fn zero_params_give_zero_output() {
        let dims = ModelDims {
            channels: 4,
            blocks: 1,
            upscale: 4,
        };
        let params = ModelParams::zeros(dims).unwrap();
        let x = random_input(1, 2, 8, 8);
        let (out, _) = model_forward(&params, &x).unwrap();
        assert_eq!(out.dims(), (2, 1, 8, 8));
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_shape_follows_upscale_factor() {
        for (r, expect) in [(1usize, 4usize), (2, 8), (4, 16)] {
            let dims = ModelDims {
                channels: 4,
                blocks: 0,
                upscale: r,
            };
            let params = init_params(dims, 0).unwrap();
            let x = random_input(2, 1, 16, 16);
            let (out, _) = model_forward(&params, &x).unwrap();
            assert_eq!(out.dims(), (1, 1, expect, expect));
        }
    }

    #[test]
    fn rejects_bad_input_shapes() {
        let params = ModelParams::zeros(ModelDims::default()).unwrap();
        // Wrong channel count.
        assert!(model_forward(&params, &Tensor4::zeros(1, 1, 8, 8)).is_err());
        // Not divisible by 4.
        assert!(model_forward(&params, &Tensor4::zeros(1, 3, 10, 8)).is_err());
        assert!(model_forward(&params, &Tensor4::zeros(1, 3, 8, 6)).is_err());
    }

    #[test]
    fn dims_validation_rejects_bad_upscale() {
        assert!(ModelDims {
            channels: 4,
            blocks: 0,
            upscale: 3,
        }
        .validate()
        .is_err());
        assert!(ModelDims {
            channels: 0,
            blocks: 0,
            upscale: 1,
        }
        .validate()
        .is_err());
    }

    #[test]
    fn he_init_variance_is_close_over_seeds() {
        // stem2 is a C->C layer; with C=16 its fan-in is 144.
        let dims = ModelDims {
            channels: 16,
            blocks: 0,
            upscale: 1,
        };
        let target = 2.0 / 144.0;
        let mut mean_var = 0.0;
        for seed in 0..10 {
            let params = init_params(dims, seed).unwrap();
            let slots = params.slots();
            let w = params.weight(&slots[1]);
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / w.len() as f64;
            mean_var += var / 10.0;
        }
        assert!(
            (mean_var - target).abs() < 0.25 * target,
            "sample variance {mean_var} vs target {target}"
        );
    }

    #[test]
    fn init_is_deterministic_and_biases_zero() {
        let dims = ModelDims {
            channels: 4,
            blocks: 1,
            upscale: 2,
        };
        let a = init_params(dims, 7).unwrap();
        let b = init_params(dims, 7).unwrap();
        let c = init_params(dims, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let slots = a.slots();
        for slot in &slots {
            assert!(a.bias(slot).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn pixel_shuffle_hand_example_and_bijection() {
        // Channels [0,1,2,3] at one position spread into a 2x2 cell.
        let x = Tensor4::from_vec(1, 4, 1, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.dims(), (1, 1, 2, 2));
        assert_eq!(y.data(), &[0.0, 1.0, 2.0, 3.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = Tensor4::from_vec(
            2,
            16,
            3,
            5,
            (0..2 * 16 * 15).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        for r in [1usize, 2, 4] {
            let back = pixel_unshuffle(&pixel_shuffle(&t, r).unwrap(), r).unwrap();
            assert_eq!(back, t);
        }
        assert!(pixel_shuffle(&t, 3).is_err());
    }

    #[test]
    fn residual_block_with_zero_params_is_identity() {
        let spec = ConvSpec {
            in_c: 2,
            out_c: 2,
            stride: 1,
        };
        let x = random_input(3, 1, 4, 4);
        let x2 = Tensor4::from_vec(1, 2, 4, 4, x.data()[..32].to_vec()).unwrap();
        let z = vec![0.0; spec.weight_len()];
        let out =
            residual_block_forward(&x2, &z, &[0.0; 2], &z, &[0.0; 2], spec).unwrap();
        assert_eq!(out, x2);
    }

    #[test]
    fn model_gradient_spot_check_against_finite_differences() {
        use crate::objectives::si_loss;
        use crate::raster::Raster;

        let dims = ModelDims {
            channels: 2,
            blocks: 1,
            upscale: 4,
        };
        let params = init_params(dims, 3).unwrap();
        let x = random_input(4, 1, 8, 8);
        let target = Raster::from_fn(8, 8, 1, |px, py, _| ((px + py) as f64 * 0.1).sin()).unwrap();

        let loss_of = |p: &ModelParams| -> f64 {
            let (out, _) = model_forward(p, &x).unwrap();
            let pred = Raster::from_vec(8, 8, 1, out.data().to_vec()).unwrap();
            si_loss(&pred, &target).unwrap().value
        };

        let (out, cache) = model_forward(&params, &x).unwrap();
        let pred = Raster::from_vec(8, 8, 1, out.data().to_vec()).unwrap();
        let loss = si_loss(&pred, &target).unwrap();
        let g_out = Tensor4::from_vec(1, 1, 8, 8, loss.grad.samples().to_vec()).unwrap();
        let grads = model_backward(&params, &cache, &g_out).unwrap();

        let h = 1e-6;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let i = rng.gen_range(0..params.flat().len());
            let mut bumped = params.clone();
            bumped.flat_mut()[i] += h;
            let fp = loss_of(&bumped);
            bumped.flat_mut()[i] = params.flat()[i] - h;
            let fm = loss_of(&bumped);
            let numeric = (fp - fm) / (2.0 * h);
            let analytic = grads.flat()[i];
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-4, "param {i}: analytic {analytic}, numeric {numeric}");
        }
    }

    #[test]
    fn gradients_are_additive_over_the_batch() {
        let dims = ModelDims {
            channels: 2,
            blocks: 1,
            upscale: 4,
        };
        let params = init_params(dims, 5).unwrap();
        let x = random_input(6, 2, 8, 8);
        let x0 = Tensor4::from_vec(1, 3, 8, 8, x.data()[..192].to_vec()).unwrap();
        let x1 = Tensor4::from_vec(1, 3, 8, 8, x.data()[192..].to_vec()).unwrap();

        // Sum-reduced loss: gradient of a batch is the sum of per-item runs.
        let g_all = {
            let (out, cache) = model_forward(&params, &x).unwrap();
            let g = Tensor4::from_vec(2, 1, 8, 8, vec![1.0; out.len()]).unwrap();
            model_backward(&params, &cache, &g).unwrap()
        };
        let g_each = |xi: &Tensor4| {
            let (out, cache) = model_forward(&params, xi).unwrap();
            let g = Tensor4::from_vec(1, 1, 8, 8, vec![1.0; out.len()]).unwrap();
            model_backward(&params, &cache, &g).unwrap()
        };
        let g0 = g_each(&x0);
        let g1 = g_each(&x1);
        for i in 0..g_all.flat().len() {
            let sum = g0.flat()[i] + g1.flat()[i];
            assert!(
                (g_all.flat()[i] - sum).abs() <= 1e-9 * sum.abs().max(1.0),
                "param {i}"
            );
        }
    }
}
