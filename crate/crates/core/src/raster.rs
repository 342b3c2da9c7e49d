//! Dense 2-D image storage shared by the renderer, the normalizers, the
//! losses and the file formats.
//!
//! A [`Raster`] is `height` rows of `width` pixels with 1 or 3 interleaved
//! `f64` channels, row-major from the top-left. Construction checks that the
//! buffer length matches the dimensions and that every sample is finite, so
//! downstream numeric code never has to re-validate.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Raster {
    /// Allocates a raster filled with `fill`. Dimensions must be non-zero
    /// and `channels` must be 1 or 3.
    pub fn filled(width: usize, height: usize, channels: usize, fill: f64) -> Result<Raster> {
        Self::from_vec(width, height, channels, vec![fill; width * height * channels])
    }

    /// Wraps an existing buffer. Fails if the length disagrees with the
    /// dimensions or any sample is non-finite.
    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Raster> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidRaster(format!(
                "dimensions must be non-zero, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidRaster(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::InvalidRaster(format!(
                "buffer holds {} samples, {width}x{height}x{channels} needs {expected}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "raster sample at flat index {bad} is {}",
                data[bad]
            )));
        }
        Ok(Raster {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a raster by evaluating `f(x, y, c)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Raster> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::from_vec(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Total number of samples (pixels times channels).
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    fn index(&self, x: usize, y: usize, c: usize) -> usize {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    pub fn samples(&self) -> &[f64] {
        &self.data
    }

    /// Two rasters agree in width, height and channel count.
    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Applies `f` to every sample, revalidating finiteness of the result.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Raster> {
        Raster::from_vec(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Consumes the raster, returning the raw sample buffer.
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Mutable access for code that preserves the finiteness invariant
    /// itself (hot loops in the renderer and losses).
    pub(crate) fn samples_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}
