//! PFM and PPM image files.
//!
//! Depth (and any other float data) travels as Portable Float Maps: a text
//! header — `Pf` for one channel or `PF` for three, then `width height`,
//! then a negative scale marking little-endian — followed by raw 32-bit
//! floats stored bottom row first. RGB travels as binary PPM (`P6`, maxval
//! 255). Readers are strict: they accept exactly what the writers emit, so a
//! round-trip is bit-identical at 32-bit precision for PFM and within half a
//! quantization step (1/510) per sample for PPM.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Reads the next whitespace-delimited ASCII token.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn parse_dim(path: &Path, token: Option<&[u8]>, what: &str) -> Result<usize> {
    let token = token.ok_or_else(|| format_err(path, format!("missing {what}")))?;
    let text = std::str::from_utf8(token)
        .map_err(|_| format_err(path, format!("{what} is not ASCII")))?;
    let value: usize = text
        .parse()
        .map_err(|_| format_err(path, format!("{what} {text:?} is not a positive integer")))?;
    if value == 0 {
        return Err(format_err(path, format!("{what} must be nonzero")));
    }
    Ok(value)
}

/// After the final header token exactly one whitespace byte separates header
/// from payload; returns the payload slice.
fn payload<'a>(bytes: &'a [u8], pos: usize, path: &Path) -> Result<&'a [u8]> {
    if pos >= bytes.len() {
        return Err(format_err(path, "truncated before payload"));
    }
    Ok(&bytes[pos + 1..])
}

/// Writes `raster` as a little-endian PFM (`Pf` for 1 channel, `PF` for 3).
pub fn write_pfm(raster: &Raster, path: &Path) -> Result<()> {
    let magic = match raster.channels() {
        1 => "Pf",
        3 => "PF",
        c => {
            return Err(Error::ShapeMismatch(format!(
                "PFM stores 1 or 3 channels, not {c}"
            )))
        }
    };
    let (w, h) = (raster.width(), raster.height());
    let mut bytes = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    bytes.reserve(raster.len() * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            for c in 0..raster.channels() {
                let v = raster.get(x, y, c);
                let f = v as f32;
                if !f.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "sample ({x}, {y}, {c}) = {v} does not fit a finite 32-bit float"
                    )));
                }
                bytes.extend_from_slice(&f.to_le_bytes());
            }
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Reads a little-endian PFM written by [`write_pfm`].
pub fn read_pfm(path: &Path) -> Result<Raster> {
    let bytes =
        fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut pos = 0;
    let channels = match next_token(&bytes, &mut pos) {
        Some(b"Pf") => 1,
        Some(b"PF") => 3,
        Some(other) => {
            return Err(format_err(
                path,
                format!("bad magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
        None => return Err(format_err(path, "empty file")),
    };
    let w = parse_dim(path, next_token(&bytes, &mut pos), "width")?;
    let h = parse_dim(path, next_token(&bytes, &mut pos), "height")?;
    let scale_token = next_token(&bytes, &mut pos)
        .ok_or_else(|| format_err(path, "missing scale"))?;
    let scale: f64 = std::str::from_utf8(scale_token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format_err(path, "scale is not a number"))?;
    if scale >= 0.0 {
        return Err(Error::UnsupportedVariant {
            path: path.to_path_buf(),
            reason: format!("scale {scale} marks big-endian data; only little-endian is read"),
        });
    }

    let data = payload(&bytes, pos, path)?;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(channels))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| format_err(path, "dimensions overflow"))?;
    if data.len() < expected {
        return Err(format_err(
            path,
            format!("payload holds {} bytes, header promises {expected}", data.len()),
        ));
    }
    if data.len() > expected {
        return Err(format_err(
            path,
            format!("{} trailing bytes after payload", data.len() - expected),
        ));
    }

    let mut samples = vec![0.0f64; w * h * channels];
    let mut offset = 0;
    for y in (0..h).rev() {
        let row = &mut samples[y * w * channels..(y + 1) * w * channels];
        for v in row.iter_mut() {
            let quad = [data[offset], data[offset + 1], data[offset + 2], data[offset + 3]];
            *v = f32::from_le_bytes(quad) as f64;
            offset += 4;
        }
    }
    Raster::from_vec(w, h, channels, samples)
}

/// Writes an RGB raster with samples in `[0, 1]` as binary PPM (`P6`,
/// maxval 255, round-half-up quantization).
pub fn write_ppm(rgb: &Raster, path: &Path) -> Result<()> {
    if rgb.channels() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "PPM stores 3 channels, not {}",
            rgb.channels()
        )));
    }
    let (w, h) = (rgb.width(), rgb.height());
    let mut bytes = format!("P6\n{w} {h}\n255\n").into_bytes();
    bytes.reserve(rgb.len());
    for &v in rgb.samples() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidConfig(format!(
                "PPM samples must lie in [0, 1], got {v}"
            )));
        }
        bytes.push((v * 255.0 + 0.5).floor() as u8);
    }
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Reads a binary PPM written by [`write_ppm`]; samples come back in
/// `[0, 1]` as `byte / 255`.
pub fn read_ppm(path: &Path) -> Result<Raster> {
    let bytes =
        fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut pos = 0;
    match next_token(&bytes, &mut pos) {
        Some(b"P6") => {}
        Some(other) => {
            return Err(format_err(
                path,
                format!("bad magic {:?}", String::from_utf8_lossy(other)),
            ))
        }
        None => return Err(format_err(path, "empty file")),
    }
    let w = parse_dim(path, next_token(&bytes, &mut pos), "width")?;
    let h = parse_dim(path, next_token(&bytes, &mut pos), "height")?;
    match next_token(&bytes, &mut pos) {
        Some(b"255") => {}
        Some(other) => {
            return Err(Error::UnsupportedVariant {
                path: path.to_path_buf(),
                reason: format!(
                    "maxval {:?}; only 255 is read",
                    String::from_utf8_lossy(other)
                ),
            })
        }
        None => return Err(format_err(path, "missing maxval")),
    }

    let data = payload(&bytes, pos, path)?;
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| format_err(path, "dimensions overflow"))?;
    if data.len() != expected {
        return Err(format_err(
            path,
            format!("payload holds {} bytes, header promises {expected}", data.len()),
        ));
    }
    Raster::from_vec(w, h, 3, data.iter().map(|&b| b as f64 / 255.0).collect())
}
