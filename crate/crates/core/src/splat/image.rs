//! Float images plus PNG and raw float (TVGF) file formats.
//!
//! TVGF layout: 16-byte header (`b"TVGF"`, then little-endian `u32` height,
//! width, channels) followed by `height·width·channels` little-endian `f32`
//! samples in row-major, channel-interleaved order.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use crate::error::{Result, TvgError};

pub const TVGF_MAGIC: &[u8; 4] = b"TVGF";

/// Row-major, channel-interleaved `f64` image. Color images hold values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(TvgError::DimensionMismatch(format!(
                "{} samples for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
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

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(TvgError::DimensionMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )))
        }
    }

    /// Bilinear sample at a continuous pixel position, clamped to the border.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Vec<f64> {
        let u = u.clamp(0.0, (self.width - 1) as f64);
        let v = v.clamp(0.0, (self.height - 1) as f64);
        let x0 = u.floor() as usize;
        let y0 = v.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        (0..self.channels)
            .map(|c| {
                let top = self.get(x0, y0, c) * (1.0 - fx) + self.get(x1, y0, c) * fx;
                let bottom = self.get(x0, y1, c) * (1.0 - fx) + self.get(x1, y1, c) * fx;
                top * (1.0 - fy) + bottom * fy
            })
            .collect()
    }

    /// One plane of a multi-channel image.
    pub fn plane(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    pub fn write_tvgf(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(16 + self.data.len() * 4);
        bytes.extend_from_slice(TVGF_MAGIC);
        for dim in [self.height, self.width, self.channels] {
            bytes.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        for v in &self.data {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        crate::pipeline::io::write_atomic(path, &bytes)
    }

    pub fn read_tvgf(path: &Path) -> Result<Image> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
            .map_err(|e| TvgError::io(path, e))?;
        if bytes.len() < 16 || &bytes[0..4] != TVGF_MAGIC {
            return Err(TvgError::parse(path, 1, "missing TVGF magic"));
        }
        let word = |i: usize| {
            u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]) as usize
        };
        let (height, width, channels) = (word(4), word(8), word(12));
        let n = height * width * channels;
        if bytes.len() != 16 + 4 * n {
            return Err(TvgError::parse(
                path,
                1,
                format!(
                    "expected {} payload bytes, found {}",
                    4 * n,
                    bytes.len() - 16
                ),
            ));
        }
        let data = bytes[16..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Image::from_data(width, height, channels, data)
    }

    /// 8-bit PNG (gray for one channel, RGB for three).
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let color = match self.channels {
            1 => png::ColorType::Grayscale,
            3 => png::ColorType::Rgb,
            c => {
                return Err(TvgError::DimensionMismatch(format!(
                    "cannot write {c}-channel png"
                )))
            }
        };
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut buf, self.width as u32, self.height as u32);
            enc.set_color(color);
            enc.set_depth(png::BitDepth::Eight);
            let mut w = enc
                .write_header()
                .map_err(|e| TvgError::Png(e.to_string()))?;
            let bytes: Vec<u8> = self
                .data
                .iter()
                .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
                .collect();
            w.write_image_data(&bytes)
                .map_err(|e| TvgError::Png(e.to_string()))?;
        }
        crate::pipeline::io::write_atomic(path, &buf)
    }

    pub fn read_png(path: &Path) -> Result<Image> {
        let file = File::open(path).map_err(|e| TvgError::io(path, e))?;
        let decoder = png::Decoder::new(BufReader::new(file));
        let mut reader = decoder
            .read_info()
            .map_err(|e| TvgError::Png(e.to_string()))?;
        let size = reader
            .output_buffer_size()
            .ok_or_else(|| TvgError::Png("image too large".into()))?;
        let mut buf = vec![0; size];
        let info = reader
            .next_frame(&mut buf)
            .map_err(|e| TvgError::Png(e.to_string()))?;
        let channels = match (info.color_type, info.bit_depth) {
            (png::ColorType::Grayscale, png::BitDepth::Eight) => 1,
            (png::ColorType::Rgb, png::BitDepth::Eight) => 3,
            other => return Err(TvgError::Png(format!("unsupported png layout {other:?}"))),
        };
        let data = buf[..info.buffer_size()]
            .iter()
            .map(|b| *b as f64 / 255.0)
            .collect();
        Image::from_data(info.width as usize, info.height as usize, channels, data)
    }
}
