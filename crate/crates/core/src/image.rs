//! Grayscale frames and the small amount of resampling the pipeline needs.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// 8-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "image data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn to_float<T: Scalar>(&self) -> FloatImage<T> {
        FloatImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| T::lit(v as f64)).collect(),
        }
    }

    pub(crate) fn ensure_same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }
}

/// Real-valued image used for interpolation and gradient work.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatImage<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> FloatImage<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![T::zero(); width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    /// Bilinear sample; `None` outside `[0, w-1] × [0, h-1]`.
    #[inline]
    pub fn sample(&self, x: T, y: T) -> Option<T> {
        let max_x = T::from_count(self.width - 1);
        let max_y = T::from_count(self.height - 1);
        if !(x >= T::zero() && y >= T::zero() && x <= max_x && y <= max_y) {
            return None;
        }
        let x0 = x.floor().to_usize()?.min(self.width - 1);
        let y0 = y.floor().to_usize()?.min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - T::from_count(x0);
        let fy = y - T::from_count(y0);
        let one = T::one();
        let top = self.get(x0, y0) * (one - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (one - fx) + self.get(x1, y1) * fx;
        Some(top * (one - fy) + bot * fy)
    }

    /// Half-resolution image by 2×2 averaging (odd trailing row/column dropped).
    pub fn downsample2(&self) -> Self {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        let quarter = T::lit(0.25);
        let mut out = Self::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = ((2 * x).min(self.width - 1), (2 * y).min(self.height - 1));
                let sx1 = (sx + 1).min(self.width - 1);
                let sy1 = (sy + 1).min(self.height - 1);
                out.data[y * w + x] = (self.get(sx, sy)
                    + self.get(sx1, sy)
                    + self.get(sx, sy1)
                    + self.get(sx1, sy1))
                    * quarter;
            }
        }
        out
    }

    /// Separable [1 2 1]/4 smoothing with replicated borders.
    pub fn smooth3(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let quarter = T::lit(0.25);
        let two = T::lit(2.0);
        let mut tmp = Self::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let l = self.get(x.saturating_sub(1), y);
                let r = self.get((x + 1).min(w - 1), y);
                tmp.data[y * w + x] = (l + two * self.get(x, y) + r) * quarter;
            }
        }
        let mut out = Self::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let u = tmp.get(x, y.saturating_sub(1));
                let d = tmp.get(x, (y + 1).min(h - 1));
                out.data[y * w + x] = (u + two * tmp.get(x, y) + d) * quarter;
            }
        }
        out
    }

    /// Central-difference gradients with one-sided differences at the border.
    pub fn gradients(&self) -> (Self, Self) {
        let (w, h) = (self.width, self.height);
        let half = T::lit(0.5);
        let mut gx = Self::zeros(w, h);
        let mut gy = Self::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
                let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
                let sx = if xr - xl == 2 { half } else { T::one() };
                let sy = if yd - yu == 2 { half } else { T::one() };
                gx.data[y * w + x] = (self.get(xr, y) - self.get(xl, y)) * sx;
                gy.data[y * w + x] = (self.get(x, yd) - self.get(x, yu)) * sy;
            }
        }
        (gx, gy)
    }
}

/// Bilinear resize of the `src_w × src_h` region at `(x0, y0)` of `img` to
/// `out_w × out_h`, pixel-center aligned.
pub fn resize_region<T: Scalar>(
    img: &GrayImage,
    x0: usize,
    y0: usize,
    src_w: usize,
    src_h: usize,
    out_w: usize,
    out_h: usize,
) -> Vec<T> {
    debug_assert!(src_w > 0 && src_h > 0 && x0 + src_w <= img.width && y0 + src_h <= img.height);
    let sx = src_w as f64 / out_w as f64;
    let sy = src_h as f64 / out_h as f64;
    // Per-axis source indices and weights, computed once.
    let axis = |n_out: usize, scale: f64, n_src: usize| -> Vec<(usize, usize, f64)> {
        (0..n_out)
            .map(|i| {
                let s = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_src - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(n_src - 1);
                (i0, i1, s - i0 as f64)
            })
            .collect()
    };
    let xs = axis(out_w, sx, src_w);
    let ys = axis(out_h, sy, src_h);
    let mut out = Vec::with_capacity(out_w * out_h);
    for &(r0, r1, fy) in &ys {
        for &(c0, c1, fx) in &xs {
            let p = |c: usize, r: usize| img.get(x0 + c, y0 + r) as f64;
            let top = p(c0, r0) * (1.0 - fx) + p(c1, r0) * fx;
            let bot = p(c0, r1) * (1.0 - fx) + p(c1, r1) * fx;
            out.push(T::lit(top * (1.0 - fy) + bot * fy));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths() {
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
        assert!(GrayImage::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn bilinear_sample_interpolates() {
        let img = GrayImage::from_fn(2, 2, |x, y| (x * 10 + y * 20) as u8).to_float::<f64>();
        assert_eq!(img.sample(0.5, 0.5), Some(15.0));
        assert_eq!(img.sample(1.0, 1.0), Some(30.0));
        assert_eq!(img.sample(1.01, 0.0), None);
    }

    #[test]
    fn resize_constant_region_stays_constant() {
        let img = GrayImage::filled(8, 8, 42);
        let out: Vec<f64> = resize_region(&img, 2, 2, 3, 5, 16, 12);
        assert_eq!(out.len(), 16 * 12);
        assert!(out.iter().all(|&v| (v - 42.0).abs() < 1e-12));
    }

    #[test]
    fn gradient_of_ramp() {
        let img = GrayImage::from_fn(5, 3, |x, _| (3 * x) as u8).to_float::<f64>();
        let (gx, gy) = img.gradients();
        assert!(gx.data.iter().all(|&v| (v - 3.0).abs() < 1e-12));
        assert!(gy.data.iter().all(|&v| v == 0.0));
    }
}
