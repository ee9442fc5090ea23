//! Multi-channel rasters: intensity images, class-likelihood stacks and their
//! spatial gradients.

use std::ops::Deref;

use crate::error::{Error, Result};

/// Row-major `height x width x channels` array of floats, channel fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::Config(format!(
                "raster dimensions must be positive, got {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Config(format!(
                "raster of {width}x{height}x{channels} needs {} values, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(PixelGrid {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        PixelGrid {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
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

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// True when `(x, y)` lies in the bilinear sampling domain
    /// `[0, width - 1] x [0, height - 1]`.
    #[inline]
    pub fn can_sample(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }

    #[inline]
    fn cell(&self, x: f64, y: f64) -> (usize, usize, f64, f64) {
        let x0 = (x.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor() as usize).min(self.height.saturating_sub(2));
        (x0, y0, x - x0 as f64, y - y0 as f64)
    }

    /// Bilinear interpolation at a continuous pixel position; `false` outside
    /// the sampling domain.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        if !self.can_sample(x, y) {
            return false;
        }
        if self.width < 2 || self.height < 2 {
            out.copy_from_slice(self.pixel(x.round() as usize, y.round() as usize));
            return true;
        }
        let (x0, y0, fx, fy) = self.cell(x, y);
        let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        let p00 = self.pixel(x0, y0);
        let p10 = self.pixel(x0 + 1, y0);
        let p01 = self.pixel(x0, y0 + 1);
        let p11 = self.pixel(x0 + 1, y0 + 1);
        for c in 0..self.channels {
            out[c] = w[0] * p00[c] + w[1] * p10[c] + w[2] * p01[c] + w[3] * p11[c];
        }
        true
    }
}

impl PixelGrid {
    /// Spatial derivative of [`PixelGrid::sample_bilinear`] at `(x, y)`, per
    /// channel. On cell borders the derivative of the cell containing the
    /// point at its lower-left corner is used.
    #[inline]
    pub fn sample_bilinear_gradient(&self, x: f64, y: f64, out: &mut [[f64; 2]]) -> bool {
        if !self.can_sample(x, y) || self.width < 2 || self.height < 2 {
            return false;
        }
        let (x0, y0, fx, fy) = self.cell(x, y);
        let p00 = self.pixel(x0, y0);
        let p10 = self.pixel(x0 + 1, y0);
        let p01 = self.pixel(x0, y0 + 1);
        let p11 = self.pixel(x0 + 1, y0 + 1);
        for c in 0..self.channels {
            out[c] = [
                (1.0 - fy) * (p10[c] - p00[c]) + fy * (p11[c] - p01[c]),
                (1.0 - fx) * (p01[c] - p00[c]) + fx * (p11[c] - p10[c]),
            ];
        }
        true
    }
}

/// Intensity image with 1 (gray) or 3 (color) channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageView(PixelGrid);

impl ImageView {
    pub fn new(grid: PixelGrid) -> Result<Self> {
        if grid.channels != 1 && grid.channels != 3 {
            return Err(Error::Config(format!(
                "images need 1 or 3 channels, got {}",
                grid.channels
            )));
        }
        if let Some(v) = grid.data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Config(format!("image value {v} outside [0, 1]")));
        }
        Ok(ImageView(grid))
    }

    pub fn into_grid(self) -> PixelGrid {
        self.0
    }
}

impl Deref for ImageView {
    type Target = PixelGrid;
    fn deref(&self) -> &PixelGrid {
        &self.0
    }
}

/// Per-pixel class likelihoods, one channel per label (channel `l - 1`
/// holds label `l`).
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodStack(PixelGrid);

impl LikelihoodStack {
    /// Wraps a grid whose values are already in `[0, 1]`; no normalization.
    pub fn new(grid: PixelGrid) -> Result<Self> {
        if let Some(v) = grid.data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Config(format!("likelihood value {v} outside [0, 1]")));
        }
        Ok(LikelihoodStack(grid))
    }

    /// Rescales every pixel whose channel sum deviates from 1 by more than
    /// 1e-3. Pixels summing to zero become uniform. Returns the stack and the
    /// number of rescaled pixels.
    pub fn normalized(mut grid: PixelGrid) -> Result<(Self, usize)> {
        if let Some(v) = grid.data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Config(format!("invalid likelihood value {v}")));
        }
        let l = grid.channels;
        let mut fixed = 0;
        for px in grid.data.chunks_mut(l) {
            let s: f64 = px.iter().sum();
            if (s - 1.0).abs() > 1e-3 {
                fixed += 1;
                if s > 0.0 {
                    px.iter_mut().for_each(|v| *v /= s);
                } else {
                    px.iter_mut().for_each(|v| *v = 1.0 / l as f64);
                }
            }
        }
        Ok((LikelihoodStack(grid), fixed))
    }

    pub fn num_labels(&self) -> usize {
        self.0.channels
    }

    /// Returns a copy with every value multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let mut g = self.0.clone();
        g.data.iter_mut().for_each(|v| *v *= s);
        LikelihoodStack::new(g)
    }

    pub fn into_grid(self) -> PixelGrid {
        self.0
    }
}

impl Deref for LikelihoodStack {
    type Target = PixelGrid;
    fn deref(&self) -> &PixelGrid {
        &self.0
    }
}

/// Spatial derivatives `(d/dx, d/dy)` per pixel and channel.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<[f64; 2]>,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> [f64; 2] {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Bilinearly interpolated gradient; same domain as
    /// [`PixelGrid::sample_bilinear`].
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [[f64; 2]]) {
        let x0 = (x.floor().max(0.0) as usize).min(self.width.saturating_sub(2));
        let y0 = (y.floor().max(0.0) as usize).min(self.height.saturating_sub(2));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let w = [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy];
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let g = [
                self.get(x0, y0, c),
                self.get(x1, y0, c),
                self.get(x0, y1, c),
                self.get(x1, y1, c),
            ];
            for k in 0..2 {
                o[k] = w[0] * g[0][k] + w[1] * g[1][k] + w[2] * g[2][k] + w[3] * g[3][k];
            }
        }
    }
}

/// Central differences in the interior, one-sided differences at the border.
pub fn image_gradient(grid: &PixelGrid) -> GradientField {
    let (w, h, ch) = (grid.width, grid.height, grid.channels);
    let mut data = vec![[0.0; 2]; w * h * ch];
    let diff = |lo: usize, hi: usize, n: usize, at: &dyn Fn(usize) -> f64| -> f64 {
        if n < 2 {
            0.0
        } else {
            (at(hi) - at(lo)) / (hi - lo) as f64
        }
    };
    for y in 0..h {
        for x in 0..w {
            let (xl, xh) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yl, yh) = (y.saturating_sub(1), (y + 1).min(h - 1));
            for c in 0..ch {
                let gx = diff(xl, xh, w, &|xx| grid.get(xx, y, c));
                let gy = diff(yl, yh, h, &|yy| grid.get(x, yy, c));
                data[(y * w + x) * ch + c] = [gx, gy];
            }
        }
    }
    GradientField {
        width: w,
        height: h,
        channels: ch,
        data,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_image_has_zero_gradient() {
        let g = image_gradient(&PixelGrid::filled(5, 4, 3, 0.3));
        for y in 0..4 {
            for x in 0..5 {
                for c in 0..3 {
                    assert_eq!(g.get(x, y, c), [0.0, 0.0]);
                }
            }
        }
    }

    #[test]
    fn ramp_gradient() {
        let (w, h) = (16, 5);
        let data = (0..h).flat_map(|_| (0..w).map(|x| x as f64 / w as f64)).collect();
        let grid = PixelGrid::new(w, h, 1, data).unwrap();
        let g = image_gradient(&grid);
        for y in 0..h {
            for x in 0..w {
                let [gx, gy] = g.get(x, y, 0);
                assert_relative_eq!(gx, 1.0 / w as f64, epsilon = 1e-15);
                assert_eq!(gy, 0.0);
            }
        }
    }

    #[test]
    fn checkerboard_gradient_is_definitional() {
        let (w, h) = (8, 8);
        let data = (0..h)
            .flat_map(|y| (0..w).map(move |x| ((x / 2 + y / 2) % 2) as f64))
            .collect();
        let grid = PixelGrid::new(w, h, 1, data).unwrap();
        let g = image_gradient(&grid);
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let [gx, gy] = g.get(x, y, 0);
                assert_eq!(gx, (grid.get(x + 1, y, 0) - grid.get(x - 1, y, 0)) / 2.0);
                assert_eq!(gy, (grid.get(x, y + 1, 0) - grid.get(x, y - 1, 0)) / 2.0);
            }
        }
    }

    #[test]
    fn bilinear_reproduces_pixels_and_midpoints() {
        let grid = PixelGrid::new(2, 2, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let mut out = [0.0];
        assert!(grid.sample_bilinear(1.0, 1.0, &mut out));
        assert_eq!(out[0], 3.0);
        assert!(grid.sample_bilinear(0.5, 0.5, &mut out));
        assert_eq!(out[0], 1.5);
        assert!(!grid.sample_bilinear(1.01, 0.0, &mut out));
    }

    #[test]
    fn likelihood_normalization() {
        let grid = PixelGrid::new(1, 2, 2, vec![1.0, 1.0, 0.3, 0.7]).unwrap();
        let (stack, fixed) = LikelihoodStack::normalized(grid).unwrap();
        assert_eq!(fixed, 1);
        assert_eq!(stack.pixel(0, 0), &[0.5, 0.5]);
        assert_eq!(stack.pixel(0, 1), &[0.3, 0.7]);
    }
}
