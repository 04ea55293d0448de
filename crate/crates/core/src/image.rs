//! Raster containers shared by the whole pipeline.
//!
//! Pixel `(i, j)` covers the unit square `[i, i+1) x [j, j+1)`; its center is
//! `(i + 0.5, j + 0.5)`. Storage is row-major.

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Grayscale raster with intensities normalized to `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "expected {} intensities for a {width}x{height} image, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some((k, v)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::InvalidParameter(format!(
                "intensity {v} at index {k} is outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                data.push(f(i, j));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.width + i]
    }

    /// Copy of this image shifted by an integer offset; uncovered pixels take `fill`.
    pub fn shifted(&self, dx: i64, dy: i64, fill: f64) -> Self {
        let (w, h) = (self.width as i64, self.height as i64);
        let mut data = vec![fill; self.data.len()];
        for j in 0..h {
            for i in 0..w {
                let (si, sj) = (i - dx, j - dy);
                if si >= 0 && si < w && sj >= 0 && sj < h {
                    data[(j * w + i) as usize] = self.data[(sj * w + si) as usize];
                }
            }
        }
        Self {
            width: self.width,
            height: self.height,
            data,
        }
    }

    pub fn threshold(&self, level: f64) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.data.iter().map(|&v| v >= level).collect(),
        }
    }
}

/// Row-major boolean raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidMask(format!(
                "expected {} bits for a {width}x{height} mask, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                bits.push(f(i, j));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.width + i]
    }

    /// Out-of-range coordinates read as background.
    #[inline]
    pub fn get_signed(&self, i: i64, j: i64) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.width
            && (j as usize) < self.height
            && self.bits[j as usize * self.width + i as usize]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.bits[j * self.width + i] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Whether the pixel containing `p` is set.
    pub fn contains_point(&self, p: Point2) -> bool {
        self.get_signed(p.x.floor() as i64, p.y.floor() as i64)
    }

    pub fn to_image(&self) -> ImageGrid {
        ImageGrid {
            width: self.width,
            height: self.height,
            data: self
                .bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}
