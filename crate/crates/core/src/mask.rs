//! Binary foreground masks: morphology, connected components, PGM dumps.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForegroundMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

/// Pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }
}

/// One labeled component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub pixels: usize,
    pub bounds: PixelRect,
}

impl ForegroundMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                m.data[y * width + x] = f(x, y);
            }
        }
        m
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid("mask data length does not match dimensions"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
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

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// Fraction of set pixels over the whole frame.
    pub fn ratio(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.data.len() as f64
        }
    }

    pub fn count_in(&self, r: PixelRect) -> usize {
        let mut n = 0;
        for y in r.y0..r.y1 {
            n += self.data[y * self.width + r.x0..y * self.width + r.x1]
                .iter()
                .filter(|&&v| v)
                .count();
        }
        n
    }

    /// Clips a real-valued box to whole pixels inside the mask.
    pub fn clip_rect(&self, x: f64, y: f64, w: f64, h: f64) -> Option<PixelRect> {
        let x0 = x.round().max(0.0) as usize;
        let y0 = y.round().max(0.0) as usize;
        let x1 = ((x + w).round().max(0.0) as usize).min(self.width);
        let y1 = ((y + h).round().max(0.0) as usize).min(self.height);
        (x0 < x1 && y0 < y1).then_some(PixelRect { x0, y0, x1, y1 })
    }

    /// 3×3 erosion; pixels outside the frame count as background.
    pub fn erode(&self) -> Self {
        self.filter3(true)
    }

    /// 3×3 dilation.
    pub fn dilate(&self) -> Self {
        self.filter3(false)
    }

    fn filter3(&self, erode: bool) -> Self {
        let (w, h) = (self.width, self.height);
        let mut out = Self::empty(w, h);
        for y in 0..h {
            for x in 0..w {
                let mut acc = erode;
                'n: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        let v = nx >= 0
                            && ny >= 0
                            && (nx as usize) < w
                            && (ny as usize) < h
                            && self.get(nx as usize, ny as usize);
                        if erode && !v {
                            acc = false;
                            break 'n;
                        }
                        if !erode && v {
                            acc = true;
                            break 'n;
                        }
                    }
                }
                out.data[y * w + x] = acc;
            }
        }
        out
    }

    pub fn open(&self) -> Self {
        self.erode().dilate()
    }

    pub fn close(&self) -> Self {
        self.dilate().erode()
    }

    /// Components of set pixels inside `region`, where two pixels are neighbors
    /// when their Chebyshev distance is at most `radius` (1 = 8-connectivity).
    /// Ordered by first pixel in raster order.
    pub fn components_in(&self, region: PixelRect, radius: usize) -> Vec<Component> {
        let (rw, rh) = (region.width(), region.height());
        let mut label = vec![usize::MAX; rw * rh];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        let r = radius.max(1) as i64;
        for sy in 0..rh {
            for sx in 0..rw {
                if label[sy * rw + sx] != usize::MAX || !self.get(region.x0 + sx, region.y0 + sy) {
                    continue;
                }
                let id = out.len();
                let mut comp = Component {
                    pixels: 0,
                    bounds: PixelRect {
                        x0: sx,
                        y0: sy,
                        x1: sx + 1,
                        y1: sy + 1,
                    },
                };
                label[sy * rw + sx] = id;
                stack.push((sx, sy));
                while let Some((cx, cy)) = stack.pop() {
                    comp.pixels += 1;
                    let b = &mut comp.bounds;
                    b.x0 = b.x0.min(cx);
                    b.y0 = b.y0.min(cy);
                    b.x1 = b.x1.max(cx + 1);
                    b.y1 = b.y1.max(cy + 1);
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                            if nx < 0 || ny < 0 || nx as usize >= rw || ny as usize >= rh {
                                continue;
                            }
                            let (nx, ny) = (nx as usize, ny as usize);
                            if label[ny * rw + nx] == usize::MAX
                                && self.get(region.x0 + nx, region.y0 + ny)
                            {
                                label[ny * rw + nx] = id;
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
                comp.bounds = PixelRect {
                    x0: comp.bounds.x0 + region.x0,
                    y0: comp.bounds.y0 + region.y0,
                    x1: comp.bounds.x1 + region.x0,
                    y1: comp.bounds.y1 + region.y0,
                };
                out.push(comp);
            }
        }
        out
    }

    /// 8-connected components over the whole mask.
    pub fn components(&self) -> Vec<Component> {
        self.components_in(
            PixelRect {
                x0: 0,
                y0: 0,
                x1: self.width,
                y1: self.height,
            },
            1,
        )
    }

    /// Binary PGM (P5): 0 background, 255 foreground.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| if v { 255u8 } else { 0 }));
        out
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(w: usize, h: usize, x0: usize, y0: usize, s: usize) -> ForegroundMask {
        ForegroundMask::from_fn(w, h, |x, y| x >= x0 && x < x0 + s && y >= y0 && y < y0 + s)
    }

    #[test]
    fn opening_removes_speckle_keeps_square() {
        let mut m = square(30, 30, 5, 5, 10);
        m.set(25, 25, true);
        let o = m.open();
        assert!(!o.get(25, 25));
        assert_eq!(o.count(), 100);
        assert_eq!(m.close().count(), 101);
    }

    #[test]
    fn components_respect_radius() {
        // two 3x3 squares with a 2-pixel gap
        let m = ForegroundMask::from_fn(12, 5, |x, y| y < 3 && (x < 3 || (5..8).contains(&x)));
        assert_eq!(m.components().len(), 2);
        let all = PixelRect {
            x0: 0,
            y0: 0,
            x1: 12,
            y1: 5,
        };
        assert_eq!(m.components_in(all, 3).len(), 1);
        let c = &m.components()[1];
        assert_eq!(c.pixels, 9);
        assert_eq!(
            c.bounds,
            PixelRect {
                x0: 5,
                y0: 0,
                x1: 8,
                y1: 3
            }
        );
    }

    #[test]
    fn pgm_header_and_payload() {
        let m = square(3, 2, 0, 0, 1);
        let pgm = m.to_pgm();
        assert!(pgm.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(&pgm[pgm.len() - 6..], &[255, 0, 0, 0, 0, 0]);
    }
}
