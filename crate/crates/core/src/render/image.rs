//! Linear-light RGB raster with PFM and PNG output.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::color::Rgb;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("malformed PFM: {0}")]
    MalformedPfm(String),
    #[error("PNG encoding failed: {0}")]
    Png(#[from] png::EncodingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Row-major RGB image, row 0 at the top.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    pixels: Vec<[f32; 3]>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize) -> Self {
        ImageBuffer {
            width,
            height,
            pixels: vec![[0.0; 3]; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> [f32; 3]) -> Self {
        let pixels = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        ImageBuffer { width, height, pixels }
    }

    pub(crate) fn from_pixels(width: usize, height: usize, pixels: Vec<[f32; 3]>) -> Self {
        debug_assert_eq!(pixels.len(), width * height);
        ImageBuffer { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[f32; 3]] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: [f32; 3]) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn rgb(&self, x: usize, y: usize) -> Rgb {
        let p = self.get(x, y);
        Rgb::new(p[0] as f64, p[1] as f64, p[2] as f64)
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|p| [f(p[0]), f(p[1]), f(p[2])]).collect(),
        }
    }

    /// Copy with every channel clamped into `[0, 1]`.
    pub fn clamped(&self) -> ImageBuffer {
        self.map(|c| c.clamp(0.0, 1.0))
    }

    pub fn check_same_size(&self, other: &ImageBuffer) -> Result<(), ImageError> {
        if self.width != other.width || self.height != other.height {
            return Err(ImageError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    /// Channels as `f64`, pixel-major then channel.
    pub fn channels(&self) -> impl Iterator<Item = f64> + '_ {
        self.pixels.iter().flat_map(|p| p.iter().map(|&c| c as f64))
    }

    pub fn is_valid(&self) -> bool {
        self.pixels.iter().flatten().all(|c| c.is_finite() && *c >= 0.0)
    }

    /// Little-endian colour PFM (scale `-1.0`), rows stored bottom to top.
    pub fn to_pfm_bytes(&self) -> Vec<u8> {
        let header = format!("PF\n{} {}\n-1.0\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.pixels.len() * 12);
        out.extend_from_slice(header.as_bytes());
        for row in self.pixels.chunks(self.width.max(1)).rev() {
            for p in row {
                for c in p {
                    out.extend_from_slice(&c.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_pfm_bytes(bytes: &[u8]) -> Result<ImageBuffer, ImageError> {
        let bad = |m: &str| ImageError::MalformedPfm(m.to_string());
        // header: three whitespace-separated tokens, then exactly one
        // whitespace byte before the raster
        let mut tokens = Vec::with_capacity(4);
        let mut pos = 0;
        while tokens.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ASCII header"))?);
        }
        if pos >= bytes.len() {
            return Err(bad("missing raster"));
        }
        pos += 1;
        let channels = match tokens[0] {
            "PF" => 3,
            "Pf" => 1,
            other => return Err(bad(&format!("unknown magic {other:?}"))),
        };
        let width: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
        let height: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
        let scale: f32 = tokens[3].parse().map_err(|_| bad("bad scale"))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(bad("scale must be non-zero"));
        }
        let little = scale < 0.0;
        let data = &bytes[pos..];
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels * 4))
            .ok_or_else(|| bad("dimensions overflow"))?;
        if data.len() != expected {
            return Err(bad(&format!("raster has {} bytes, expected {expected}", data.len())));
        }
        let floats: Vec<f32> = data
            .chunks_exact(4)
            .map(|c| {
                let b: [u8; 4] = c.try_into().expect("4-byte chunk");
                if little {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                }
            })
            .collect();
        let mut pixels = vec![[0.0f32; 3]; width * height];
        for (row_from_bottom, row) in floats.chunks(width.max(1) * channels).enumerate() {
            let y = height - 1 - row_from_bottom;
            for x in 0..width {
                pixels[y * width + x] = if channels == 3 {
                    [row[3 * x], row[3 * x + 1], row[3 * x + 2]]
                } else {
                    [row[x]; 3]
                };
            }
        }
        Ok(ImageBuffer { width, height, pixels })
    }

    /// 8-bit sRGB-ish preview: clamp to `[0, 1]`, `v^(1/2.2)`, round.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width as u32, self.height as u32);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header()?;
            let data: Vec<u8> = self.pixels.iter().flatten().map(|&c| encode_gamma(c)).collect();
            writer.write_image_data(&data)?;
        }
        Ok(out)
    }
}

/// Linear value to an 8-bit gamma-2.2 code.
pub fn encode_gamma(c: f32) -> u8 {
    let v = (c as f64).clamp(0.0, 1.0).powf(1.0 / 2.2);
    (v * 255.0).round() as u8
}

pub fn write_pfm(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), ImageError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&img.to_pfm_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_pfm(path: impl AsRef<Path>) -> Result<ImageBuffer, ImageError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    ImageBuffer::from_pfm_bytes(&bytes)
}

pub fn write_png(img: &ImageBuffer, path: impl AsRef<Path>) -> Result<(), ImageError> {
    std::fs::write(path, img.to_png_bytes()?)?;
    Ok(())
}
