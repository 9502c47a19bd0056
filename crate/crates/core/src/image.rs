//! Grayscale images on `[0, 1]`, PGM input/output and synthetic test images.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_finite, check_len, Error, Result};

/// Row-major grayscale image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!("image size {width}x{height}")));
        }
        check_len("image pixels", width * height, data.len())?;
        check_finite("image pixels", &data)?;
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Componentwise `log10(max(v, floor))`, for displaying variances.
    pub fn log10(&self, floor: f64) -> ImageGrid {
        ImageGrid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| v.max(floor).log10()).collect(),
        }
    }

    /// Affine rescale of the value range onto `[0, 1]` (constant images map to 0).
    pub fn normalized(&self) -> ImageGrid {
        let lo = self.data.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        ImageGrid {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
                .collect(),
        }
    }
}

/// Reads a binary (P5) or ASCII (P2) PGM and scales intensities by `1 / maxval`.
pub fn load_image_pgm(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let bytes = fs::read(path.as_ref())?;
    parse_pgm(&bytes)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<ImageGrid> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => {
            return Err(Error::Format(format!(
                "unsupported magic bytes {:?}, expected P2 or P5",
                String::from_utf8_lossy(magic)
            )))
        }
    };
    let mut pos = 2;
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        *slot = read_header_int(bytes, &mut pos).ok_or_else(|| Error::Format(format!("missing or malformed {name}")))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("image size {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("maxval {maxval} outside 1..=65535")));
    }
    let n = width * height;
    let scale = 1.0 / maxval as f64;
    let mut data = Vec::with_capacity(n);
    if binary {
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let bpp = if maxval > 255 { 2 } else { 1 };
        let raster = bytes.get(pos..pos + n * bpp).ok_or_else(|| {
            Error::Format(format!(
                "truncated raster: need {} bytes, found {}",
                n * bpp,
                bytes.len().saturating_sub(pos)
            ))
        })?;
        for px in raster.chunks_exact(bpp) {
            let v = if bpp == 2 { u16::from_be_bytes([px[0], px[1]]) as usize } else { px[0] as usize };
            data.push(check_sample(v, maxval)? as f64 * scale);
        }
    } else {
        for i in 0..n {
            let v = read_header_int(bytes, &mut pos)
                .ok_or_else(|| Error::Format(format!("truncated ASCII raster at pixel {i} of {n}")))?;
            data.push(check_sample(v, maxval)? as f64 * scale);
        }
    }
    ImageGrid::new(width, height, data)
}

fn check_sample(v: usize, maxval: usize) -> Result<usize> {
    if v > maxval {
        Err(Error::Format(format!("sample {v} exceeds maxval {maxval}")))
    } else {
        Ok(v)
    }
}

fn read_header_int(bytes: &[u8], pos: &mut usize) -> Option<usize> {
    loop {
        match bytes.get(*pos)? {
            b'#' => {
                while *bytes.get(*pos)? != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    std::str::from_utf8(&bytes[start..*pos]).ok()?.parse().ok()
}

/// Encodes as binary PGM, clamping to `[0, 1]` and quantizing to `maxval`
/// levels (16-bit samples when `maxval > 255`).
pub fn encode_pgm(img: &ImageGrid, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::InvalidParameter("maxval must be positive".into()));
    }
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    for v in &img.data {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u16;
        if maxval > 255 {
            out.extend_from_slice(&q.to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    Ok(out)
}

pub fn save_image_pgm(img: &ImageGrid, path: impl AsRef<Path>, maxval: u16) -> Result<()> {
    fs::write(path.as_ref(), encode_pgm(img, maxval)?)?;
    Ok(())
}

/// Adds iid `N(0, sigma_eps^2)` noise to every pixel, without clipping.
pub fn add_gaussian_noise(img: &ImageGrid, sigma_eps: f64, seed: u64) -> Result<ImageGrid> {
    if !(sigma_eps >= 0.0 && sigma_eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise level {sigma_eps}")));
    }
    if sigma_eps == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma_eps).expect("validated std");
    let data = img.data.iter().map(|v| v + noise.sample(&mut rng)).collect();
    ImageGrid::new(img.width, img.height, data)
}

/// Piecewise-constant test image: background, a bright rectangle, a
/// mid-gray disc and a dark bar, all in `[0, 1]`.
pub fn phantom(width: usize, height: usize) -> Result<ImageGrid> {
    let (w, h) = (width as f64, height as f64);
    let mut data = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let (x, y) = ((c as f64 + 0.5) / w, (r as f64 + 0.5) / h);
            let mut v = 0.2;
            if (0.1..0.45).contains(&x) && (0.15..0.6).contains(&y) {
                v = 0.9;
            }
            if (x - 0.68).powi(2) + (y - 0.62).powi(2) < 0.22f64.powi(2) {
                v = 0.6;
            }
            if (0.2..0.8).contains(&x) && (0.78..0.88).contains(&y) {
                v = 0.0;
            }
            data.push(v);
        }
    }
    ImageGrid::new(width, height, data)
}
