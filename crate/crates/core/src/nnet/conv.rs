//! 3x3 convolution with zero padding of one, forward and backward.
//!
//! Weights for one layer are flat in `[out_c][in_c][ky][kx]` order. Both
//! passes parallelize over planes whose writes never overlap, and the
//! per-plane arithmetic is a fixed-order scalar loop, so results do not
//! depend on the worker count.

use crate::error::{Error, Result};
use crate::exec::{for_each_chunk_mut, for_each_chunk_pair_mut};
use crate::nnet::tensor::Tensor4;

/// Shape of one conv layer. Kernels are always 3x3 with padding 1; only the
/// stride varies (1, or 2 for the downsampling stem).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_c: usize,
    pub out_c: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub fn weight_len(&self) -> usize {
        self.out_c * self.in_c * 9
    }

    /// Output spatial size for an input extent: `(in - 1) / stride + 1`.
    pub fn out_extent(&self, extent: usize) -> usize {
        (extent + 2 - 3) / self.stride + 1
    }
}

/// Convolves `x` with `weight`/`bias` described by `spec`.
pub fn conv_forward(x: &Tensor4, weight: &[f64], bias: &[f64], spec: ConvSpec) -> Result<Tensor4> {
    let (n, c, h, w) = x.dims();
    if c != spec.in_c {
        return Err(Error::ShapeMismatch(format!(
            "conv expects {} input channels, got {c}",
            spec.in_c
        )));
    }
    if weight.len() != spec.weight_len() || bias.len() != spec.out_c {
        return Err(Error::ShapeMismatch(
            "conv parameter buffers disagree with the layer spec".into(),
        ));
    }
    let (oh, ow) = (spec.out_extent(h), spec.out_extent(w));
    let mut out = Tensor4::zeros(n, spec.out_c, oh, ow);

    let plane = oh * ow;
    for_each_chunk_mut(out.data_mut(), plane, |p, out_plane| {
        let ni = p / spec.out_c;
        let oc = p % spec.out_c;
        let w_base = oc * spec.in_c * 9;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = bias[oc];
                for ic in 0..spec.in_c {
                    let k_base = w_base + ic * 9;
                    for ky in 0..3 {
                        let iy = (oy * spec.stride + ky) as isize - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..3 {
                            let ix = (ox * spec.stride + kx) as isize - 1;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += weight[k_base + ky * 3 + kx]
                                * x.get(ni, ic, iy as usize, ix as usize);
                        }
                    }
                }
                out_plane[oy * ow + ox] = acc;
            }
        }
    });
    Ok(out)
}

/// Gradients of a conv layer given the upstream gradient `g_out`.
///
/// Returns `(g_weight, g_bias, g_input)`; the input gradient is skipped when
/// `need_g_input` is false (the first layer of the network does not use it).
pub fn conv_backward(
    x: &Tensor4,
    weight: &[f64],
    spec: ConvSpec,
    g_out: &Tensor4,
    need_g_input: bool,
) -> Result<(Vec<f64>, Vec<f64>, Option<Tensor4>)> {
    let (n, c, h, w) = x.dims();
    let (gn, gc, gh, gw) = g_out.dims();
    if c != spec.in_c
        || gn != n
        || gc != spec.out_c
        || gh != spec.out_extent(h)
        || gw != spec.out_extent(w)
    {
        return Err(Error::ShapeMismatch(
            "conv backward shapes disagree with the layer spec".into(),
        ));
    }

    // Parameter gradients: one worker per output channel, accumulating over
    // the batch and all output positions in a fixed order.
    let mut g_weight = vec![0.0f64; spec.weight_len()];
    let mut g_bias = vec![0.0f64; spec.out_c];
    for_each_chunk_pair_mut(&mut g_weight, spec.in_c * 9, &mut g_bias, 1, |oc, gw_c, gb_c| {
        for ni in 0..n {
            for oy in 0..gh {
                for ox in 0..gw {
                    let g = g_out.get(ni, oc, oy, ox);
                    gb_c[0] += g;
                    for ic in 0..spec.in_c {
                        let k_base = ic * 9;
                        for ky in 0..3 {
                            let iy = (oy * spec.stride + ky) as isize - 1;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..3 {
                                let ix = (ox * spec.stride + kx) as isize - 1;
                                if ix < 0 || ix >= w as isize {
                                    continue;
                                }
                                gw_c[k_base + ky * 3 + kx] +=
                                    g * x.get(ni, ic, iy as usize, ix as usize);
                            }
                        }
                    }
                }
            }
        }
    });

    // Input gradient in gather form: each input cell collects the upstream
    // gradients of every output position its value fed.
    let g_input = if need_g_input {
        let mut g_in = Tensor4::zeros(n, spec.in_c, h, w);
        let plane = h * w;
        for_each_chunk_mut(g_in.data_mut(), plane, |p, in_plane| {
            let ni = p / spec.in_c;
            let ic = p % spec.in_c;
            for iy in 0..h {
                for ix in 0..w {
                    let mut acc = 0.0;
                    for ky in 0..3 {
                        let ty = iy as isize + 1 - ky as isize;
                        if ty < 0 || ty % spec.stride as isize != 0 {
                            continue;
                        }
                        let oy = (ty / spec.stride as isize) as usize;
                        if oy >= gh {
                            continue;
                        }
                        for kx in 0..3 {
                            let tx = ix as isize + 1 - kx as isize;
                            if tx < 0 || tx % spec.stride as isize != 0 {
                                continue;
                            }
                            let ox = (tx / spec.stride as isize) as usize;
                            if ox >= gw {
                                continue;
                            }
                            for oc in 0..spec.out_c {
                                acc += g_out.get(ni, oc, oy, ox)
                                    * weight[(oc * spec.in_c + ic) * 9 + ky * 3 + kx];
                            }
                        }
                    }
                    in_plane[iy * w + ix] = acc;
                }
            }
        });
        Some(g_in)
    } else {
        None
    };

    Ok((g_weight, g_bias, g_input))
}
