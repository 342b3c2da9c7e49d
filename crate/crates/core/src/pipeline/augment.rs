//! Geometric training augmentation: upscale by a few pixels, crop back to
//! the original size at a random offset, and flip horizontally half the
//! time. RGB is resampled bilinearly; depth uses nearest-neighbor so no
//! fabricated depths appear across occlusion edges, and depth values
//! themselves are never rescaled — only pixel positions move.

use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::render::FrameSample;

/// One sampled augmentation, applicable to any frame of the right size.
/// Splitting the draw from the application keeps tests deterministic and
/// guarantees RGB and depth receive identical transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentDraw {
    /// Extra pixels added to both dimensions before cropping back.
    pub scale_px: usize,
    /// Crop offset, in `0..=scale_px` each.
    pub offset_x: usize,
    pub offset_y: usize,
    pub flip: bool,
}

/// Draws scale, crop offset, and flip for a `width` x `height` frame.
pub fn sample_augment(
    rng: &mut impl Rng,
    width: usize,
    height: usize,
    max_scale_px: usize,
) -> Result<AugmentDraw> {
    if max_scale_px >= width.min(height) {
        return Err(Error::InvalidConfig(format!(
            "max scale {max_scale_px} px must stay below the {width}x{height} frame"
        )));
    }
    let scale_px = rng.gen_range(0..=max_scale_px);
    Ok(AugmentDraw {
        scale_px,
        offset_x: rng.gen_range(0..=scale_px),
        offset_y: rng.gen_range(0..=scale_px),
        flip: rng.gen_bool(0.5),
    })
}

/// Maps an output coordinate to its continuous source position when
/// resampling `src_extent` up to `dst_extent` (pixel centers aligned).
fn source_pos(dst: usize, src_extent: usize, dst_extent: usize) -> f64 {
    (dst as f64 + 0.5) * (src_extent as f64 / dst_extent as f64) - 0.5
}

/// Bilinear upsample to `(w + scale, h + scale)`.
fn upsample_bilinear(src: &Raster, scale: usize) -> Result<Raster> {
    let (w, h, c) = (src.width(), src.height(), src.channels());
    Raster::from_fn(w + scale, h + scale, c, |x, y, ch| {
        let fx = source_pos(x, w, w + scale).clamp(0.0, (w - 1) as f64);
        let fy = source_pos(y, h, h + scale).clamp(0.0, (h - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let top = src.get(x0, y0, ch) * (1.0 - tx) + src.get(x1, y0, ch) * tx;
        let bottom = src.get(x0, y1, ch) * (1.0 - tx) + src.get(x1, y1, ch) * tx;
        top * (1.0 - ty) + bottom * ty
    })
}

/// Nearest-neighbor upsample to `(w + scale, h + scale)`; every output
/// sample is an exact copy of some input sample.
fn upsample_nearest(src: &Raster, scale: usize) -> Result<Raster> {
    let (w, h, c) = (src.width(), src.height(), src.channels());
    Raster::from_fn(w + scale, h + scale, c, |x, y, ch| {
        let sx = (source_pos(x, w, w + scale).round().max(0.0) as usize).min(w - 1);
        let sy = (source_pos(y, h, h + scale).round().max(0.0) as usize).min(h - 1);
        src.get(sx, sy, ch)
    })
}

fn crop_and_flip(src: &Raster, w: usize, h: usize, draw: &AugmentDraw) -> Result<Raster> {
    Raster::from_fn(w, h, src.channels(), |x, y, c| {
        let x = if draw.flip { w - 1 - x } else { x };
        src.get(x + draw.offset_x, y + draw.offset_y, c)
    })
}

/// Applies one draw to an RGB/depth pair, returning rasters of the original
/// size. With `scale_px = 0` and `flip = false` this is the identity.
pub fn apply_augment(rgb: &Raster, depth: &Raster, draw: &AugmentDraw) -> Result<(Raster, Raster)> {
    if rgb.width() != depth.width() || rgb.height() != depth.height() {
        return Err(Error::ShapeMismatch(format!(
            "rgb {}x{} vs depth {}x{}",
            rgb.width(),
            rgb.height(),
            depth.width(),
            depth.height()
        )));
    }
    let (w, h) = (rgb.width(), rgb.height());
    if draw.offset_x > draw.scale_px || draw.offset_y > draw.scale_px || draw.scale_px >= w.min(h)
    {
        return Err(Error::InvalidConfig(format!("inconsistent draw {draw:?}")));
    }
    let rgb_up = upsample_bilinear(rgb, draw.scale_px)?;
    let depth_up = upsample_nearest(depth, draw.scale_px)?;
    Ok((
        crop_and_flip(&rgb_up, w, h, draw)?,
        crop_and_flip(&depth_up, w, h, draw)?,
    ))
}

/// Draws and applies an augmentation to one frame; metadata rides along
/// unchanged.
pub fn augment(
    sample: &FrameSample,
    rng: &mut impl Rng,
    max_scale_px: usize,
) -> Result<FrameSample> {
    let draw = sample_augment(rng, sample.rgb.width(), sample.rgb.height(), max_scale_px)?;
    let (rgb, depth) = apply_augment(&sample.rgb, &sample.depth, &draw)?;
    Ok(FrameSample {
        rgb,
        depth,
        meta: sample.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pair(rng: &mut ChaCha8Rng, w: usize, h: usize) -> (Raster, Raster) {
        let rgb = Raster::from_fn(w, h, 3, |_, _, _| rng.gen_range(0.0..1.0)).unwrap();
        let depth = Raster::from_fn(w, h, 1, |_, _, _| rng.gen_range(0.5..100.0)).unwrap();
        (rgb, depth)
    }

    #[test]
    fn zero_scale_without_flip_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (rgb, depth) = random_pair(&mut rng, 12, 9);
        let draw = AugmentDraw {
            scale_px: 0,
            offset_x: 0,
            offset_y: 0,
            flip: false,
        };
        let (rgb2, depth2) = apply_augment(&rgb, &depth, &draw).unwrap();
        assert_eq!(rgb.samples(), rgb2.samples());
        assert_eq!(depth.samples(), depth2.samples());
    }

    #[test]
    fn flip_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let (rgb, depth) = random_pair(&mut rng, 8, 8);
        let draw = AugmentDraw {
            scale_px: 0,
            offset_x: 0,
            offset_y: 0,
            flip: true,
        };
        let (rgb1, depth1) = apply_augment(&rgb, &depth, &draw).unwrap();
        let (rgb2, depth2) = apply_augment(&rgb1, &depth1, &draw).unwrap();
        assert_eq!(rgb.samples(), rgb2.samples());
        assert_eq!(depth.samples(), depth2.samples());
    }

    #[test]
    fn output_dims_always_match_input_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let (rgb, depth) = random_pair(&mut rng, 16, 11);
        for _ in 0..1000 {
            let draw = sample_augment(&mut rng, 16, 11, 10).unwrap();
            let (rgb2, depth2) = apply_augment(&rgb, &depth, &draw).unwrap();
            assert!(rgb2.same_shape(&rgb));
            assert!(depth2.same_shape(&depth));
        }
    }

    #[test]
    fn depth_pixels_trace_back_to_source_pixels() {
        // Inverse-transform check: each augmented depth equals the source
        // depth at the nearest-neighbor preimage, bit for bit.
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let (rgb, depth) = random_pair(&mut rng, 13, 10);
        for _ in 0..50 {
            let draw = sample_augment(&mut rng, 13, 10, 7).unwrap();
            let (_, depth2) = apply_augment(&rgb, &depth, &draw).unwrap();
            let (w, h) = (13usize, 10usize);
            for y in 0..h {
                for x in 0..w {
                    let ux = if draw.flip { w - 1 - x } else { x };
                    let sx = source_pos(ux + draw.offset_x, w, w + draw.scale_px)
                        .round()
                        .max(0.0) as usize;
                    let sy = source_pos(y + draw.offset_y, h, h + draw.scale_px)
                        .round()
                        .max(0.0) as usize;
                    let expected = depth.get(sx.min(w - 1), sy.min(h - 1), 0);
                    assert_eq!(depth2.get(x, y, 0), expected);
                }
            }
        }
    }

    #[test]
    fn depth_values_come_from_the_source_set() {
        // Nearest-neighbor must never invent depths, no matter the draw.
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let (rgb, depth) = random_pair(&mut rng, 9, 9);
        for _ in 0..200 {
            let draw = sample_augment(&mut rng, 9, 9, 8).unwrap();
            let (_, depth2) = apply_augment(&rgb, &depth, &draw).unwrap();
            for v in depth2.samples() {
                assert!(depth.samples().contains(v));
            }
        }
    }

    #[test]
    fn oversized_scale_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        assert!(sample_augment(&mut rng, 8, 12, 8).is_err());
        assert!(sample_augment(&mut rng, 8, 12, 7).is_ok());
    }
}
