//! Video frame ingestion and resizing for the visual classifier.
//!
//! Frames arrive as pre-extracted PNG or binary PPM files, one directory per
//! video, enumerated in lexicographic filename order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage as Rgb8Image};

use crate::error::{Error, Result};

/// Side length the visual network expects by default.
pub const DEFAULT_FRAME_SIZE: usize = 256;
pub const DEFAULT_FRAMES_PER_VIDEO: usize = 32;

pub const FRAMES_MAGIC: &[u8; 4] = b"FRM1";

/// RGB raster with channel values in [0, 1], stored row-major as
/// `height x width x 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image dimensions must be positive".into()));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {width}x{height}x3 image",
                pixels.len()
            )));
        }
        if pixels.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput("pixel values must lie in [0, 1]".into()));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let pixels = (0..width * height).flat_map(|_| rgb).collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Planar `3 x height x width` copy, the layout the network consumes.
    pub fn to_chw(&self) -> Vec<f64> {
        let plane = self.width * self.height;
        let mut out = vec![0.0; 3 * plane];
        for (i, px) in self.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * plane + i] = px[c];
            }
        }
        out
    }

    fn to_rgb8(&self) -> Rgb8Image {
        let bytes = self.pixels.iter().map(|v| (v * 255.0).round() as u8).collect();
        Rgb8Image::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length checked at construction")
    }
}

/// Decodes a PNG or binary PPM frame, mapping 8-bit values through `v / 255`.
pub fn load_frame(path: &Path) -> Result<RgbImage> {
    let ingest = |reason: String| Error::Ingest {
        path: path.to_path_buf(),
        reason,
    };
    let decoded = image::open(path).map_err(|e| ingest(e.to_string()))?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    let pixels = rgb.into_raw().into_iter().map(|b| b as f64 / 255.0).collect();
    RgbImage::new(w as usize, h as usize, pixels).map_err(|e| ingest(e.to_string()))
}

/// Saves as PNG, or binary PPM when the extension is `.ppm`.
pub fn save_frame(path: &Path, img: &RgbImage) -> Result<()> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => ImageFormat::Pnm,
        _ => ImageFormat::Png,
    };
    img.to_rgb8()
        .save_with_format(path, format)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Bilinear resize with corner-aligned sampling: output pixel `x` samples the
/// source at `x (w_in - 1) / (w_out - 1)`, so the four corners map exactly.
pub fn resize_bilinear(img: &RgbImage, out_w: usize, out_h: usize) -> Result<RgbImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidConfig(format!(
            "target size {out_w}x{out_h} must be positive"
        )));
    }
    if out_w == img.width && out_h == img.height {
        return Ok(img.clone());
    }
    let xs = sample_positions(img.width, out_w);
    let ys = sample_positions(img.height, out_h);
    let mut pixels = Vec::with_capacity(out_w * out_h * 3);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let (p00, p10) = (img.pixel(x0, y0), img.pixel(x1, y0));
            let (p01, p11) = (img.pixel(x0, y1), img.pixel(x1, y1));
            for c in 0..3 {
                let top = p00[c] + (p10[c] - p00[c]) * fx;
                let bottom = p01[c] + (p11[c] - p01[c]) * fx;
                // the clamp only absorbs rounding, interpolation cannot overshoot
                pixels.push((top + (bottom - top) * fy).clamp(0.0, 1.0));
            }
        }
    }
    RgbImage::new(out_w, out_h, pixels)
}

fn sample_positions(len_in: usize, len_out: usize) -> Vec<(usize, usize, f64)> {
    (0..len_out)
        .map(|i| {
            let pos = if len_out == 1 {
                (len_in - 1) as f64 / 2.0
            } else {
                i as f64 * (len_in - 1) as f64 / (len_out - 1) as f64
            };
            let lo = (pos.floor() as usize).min(len_in - 1);
            let hi = (lo + 1).min(len_in - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

/// PNG and PPM files in `dir`, sorted by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "ppm")) && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Indices of at most `max` frames spread uniformly over `total`.
pub fn subsample_indices(total: usize, max: usize) -> Vec<usize> {
    if total <= max {
        return (0..total).collect();
    }
    (0..max).map(|i| i * total / max).collect()
}

/// Loads up to `max_frames` frames of one video, each resized to
/// `size x size`.
pub fn load_video_frames(dir: &Path, max_frames: usize, size: usize) -> Result<Vec<RgbImage>> {
    let paths = list_frames(dir)?;
    if paths.is_empty() {
        return Err(Error::Ingest {
            path: dir.to_path_buf(),
            reason: "no PNG or PPM frames found".into(),
        });
    }
    subsample_indices(paths.len(), max_frames)
        .into_iter()
        .map(|i| resize_bilinear(&load_frame(&paths[i])?, size, size))
        .collect()
}

/// Writes a stack of equally sized frames: `FRM1`, u32 count, u32 height,
/// u32 width, then each frame as planar `3 x h x w` f32, little-endian.
pub fn write_frame_stack(path: &Path, frames: &[RgbImage]) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidInput("cannot write an empty frame stack".into()))?;
    let (w, h) = (first.width, first.height);
    if frames.iter().any(|f| f.width != w || f.height != h) {
        return Err(Error::Shape("frames in a stack must share dimensions".into()));
    }
    let mut buf = Vec::with_capacity(16 + frames.len() * w * h * 12);
    buf.extend_from_slice(FRAMES_MAGIC);
    for dim in [frames.len(), h, w] {
        buf.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    for frame in frames {
        for v in frame.to_chw() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads a frame stack back as planar `3 x h x w` buffers plus `(h, w)`.
pub fn read_frame_stack(path: &Path) -> Result<(Vec<Vec<f64>>, usize, usize)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != FRAMES_MAGIC {
        return Err(Error::format(path, "missing FRM1 header"));
    }
    let dim = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    let (count, h, w) = (dim(0), dim(1), dim(2));
    let per_frame = 3 * h * w;
    if bytes.len() != 16 + 4 * count * per_frame {
        return Err(Error::format(path, "payload size does not match header"));
    }
    let values: Vec<f64> = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let frames = values.chunks_exact(per_frame.max(1)).map(<[f64]>::to_vec).collect();
    Ok((frames, h, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_resize_is_bit_exact() {
        let img = RgbImage::new(2, 2, (0..12).map(|i| i as f64 / 11.0).collect()).unwrap();
        assert_eq!(resize_bilinear(&img, 2, 2).unwrap(), img);
    }

    #[test]
    fn two_to_three_interpolates_midpoint() {
        let img = RgbImage::new(2, 1, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let out = resize_bilinear(&img, 3, 1).unwrap();
        let reds: Vec<f64> = (0..3).map(|x| out.pixel(x, 0)[0]).collect();
        assert_eq!(reds, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn constant_image_stays_constant() {
        let img = RgbImage::filled(7, 5, [0.2, 0.4, 0.6]).unwrap();
        for (w, h) in [(1, 1), (3, 9), (16, 16), (256, 256)] {
            let out = resize_bilinear(&img, w, h).unwrap();
            for px in out.pixels().chunks_exact(3) {
                assert!((px[0] - 0.2).abs() < 1e-15);
                assert!((px[1] - 0.4).abs() < 1e-15);
                assert!((px[2] - 0.6).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_target_rejected() {
        let img = RgbImage::filled(2, 2, [0.0; 3]).unwrap();
        assert!(matches!(resize_bilinear(&img, 0, 3), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn subsample_uniform() {
        assert_eq!(subsample_indices(3, 8), vec![0, 1, 2]);
        assert_eq!(subsample_indices(10, 5), vec![0, 2, 4, 6, 8]);
        assert_eq!(subsample_indices(100, 4), vec![0, 25, 50, 75]);
    }

    #[test]
    fn chw_layout() {
        let img = RgbImage::new(2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        assert_eq!(img.to_chw(), vec![0.1, 0.4, 0.2, 0.5, 0.3, 0.6]);
    }

    #[test]
    fn rejects_out_of_range_pixels() {
        assert!(RgbImage::new(1, 1, vec![0.0, 1.5, 0.0]).is_err());
        assert!(RgbImage::new(0, 1, vec![]).is_err());
    }
}
