//! Dense 2D grids of C-channel vectors: images, depth maps, feature maps.

use crate::error::{Error, Result};

/// Row-major grid of `channels`-wide vectors. Texel `(x, y)` occupies
/// `data[(y * width + x) * channels..][..channels]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize, channels: usize) -> Result<Self> {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::domain(format!("grid must be non-empty, got {width}x{height}x{channels}")));
        }
        Ok(Self { width, height, channels, data: vec![value; width * height * channels] })
    }

    pub fn from_vec(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::domain(format!("grid must be non-empty, got {width}x{height}x{channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::mismatch(width * height * channels, data.len()));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds a grid by evaluating `f(x, y, out)` for every texel.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, &mut [f64]),
    ) -> Result<Self> {
        let mut g = Self::new(width, height, channels)?;
        for y in 0..height {
            for x in 0..width {
                f(x, y, g.texel_mut(x, y));
            }
        }
        Ok(g)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub(crate) fn ensure_same_shape(&self, other: &Grid) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::mismatch(self.shape_string(), other.shape_string()))
        }
    }

    pub fn shape_string(&self) -> String {
        format!("{}x{}x{}", self.width, self.height, self.channels)
    }

    #[inline]
    pub fn texel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn texel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Bilinear lookup at continuous coordinates where texel `(i, j)` has
    /// its center at `(i + 0.5, j + 0.5)`. Coordinates outside the grid
    /// clamp to the border texels. Writes `channels` values into `out`.
    pub fn bilinear_into(&self, x: f64, y: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.channels);
        let fx = x - 0.5;
        let fy = y - 0.5;
        let x0 = fx.floor();
        let y0 = fy.floor();
        let wx = fx - x0;
        let wy = fy - y0;
        let xi0 = clamp_index(x0, self.width);
        let xi1 = clamp_index(x0 + 1.0, self.width);
        let yi0 = clamp_index(y0, self.height);
        let yi1 = clamp_index(y0 + 1.0, self.height);
        let t00 = self.texel(xi0, yi0);
        let t10 = self.texel(xi1, yi0);
        let t01 = self.texel(xi0, yi1);
        let t11 = self.texel(xi1, yi1);
        for c in 0..self.channels {
            let top = t00[c] + (t10[c] - t00[c]) * wx;
            let bottom = t01[c] + (t11[c] - t01[c]) * wx;
            out[c] = top + (bottom - top) * wy;
        }
    }

    pub fn bilinear(&self, x: f64, y: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.bilinear_into(x, y, &mut out);
        out
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (a, v) in acc.iter_mut().zip(px) {
                *a += v;
            }
        }
        let n = (self.width * self.height) as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Largest absolute per-element difference.
    pub fn max_abs_diff(&self, other: &Grid) -> Result<f64> {
        self.ensure_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

#[inline]
fn clamp_index(i: f64, len: usize) -> usize {
    if i <= 0.0 {
        0
    } else {
        (i as usize).min(len - 1)
    }
}
