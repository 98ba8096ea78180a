//! Dual-mode single-Gaussian grid background model.
//!
//! The frame is split into `grid_cell × grid_cell` blocks. Each block keeps a
//! current model A and a candidate model B (mean, variance, age). Blocks whose
//! mean matches neither model restart B from the observation; B takes over as
//! soon as it is older than A. Foreground pixels are decided against A only.

use crate::error::{Error, Result};
use crate::geometry::{AffineTransform, BoundingBox, Point};
use crate::image::GrayImage;
use crate::mask::ForegroundMask;
use crate::scalar::Scalar;

/// Mean, variance and age of one single-Gaussian model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaussianCell<T> {
    pub mean: T,
    pub variance: T,
    pub age: T,
}

/// Current (A) and candidate (B) models of one grid block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DualCell<T> {
    pub current: GaussianCell<T>,
    pub candidate: GaussianCell<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BgModelConfig<T> {
    /// Block side N in pixels.
    pub grid_cell: usize,
    /// Variance above which a model's age is decayed before updating.
    pub theta_v: T,
    /// Age decay rate.
    pub decay_lambda: T,
    /// Match threshold multiplier on the model variance.
    pub theta_s: T,
    /// Foreground threshold multiplier on the current-model variance.
    pub theta_d: T,
    pub min_blob_area: usize,
    /// Lower bound applied to every updated variance.
    pub variance_floor: T,
}

impl<T: Scalar> Default for BgModelConfig<T> {
    fn default() -> Self {
        Self {
            grid_cell: 4,
            theta_v: T::lit(400.0),
            decay_lambda: T::lit(0.001),
            theta_s: T::lit(2.5),
            theta_d: T::lit(4.0),
            min_blob_area: 40,
            variance_floor: T::one(),
        }
    }
}

impl<T: Scalar> BgModelConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.grid_cell < 1 {
            return Err(Error::Config("grid_cell must be >= 1".into()));
        }
        for (name, v) in [
            ("theta_v", self.theta_v),
            ("decay_lambda", self.decay_lambda),
            ("theta_s", self.theta_s),
            ("theta_d", self.theta_d),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.variance_floor < T::zero() {
            return Err(Error::Config("variance_floor must be >= 0".into()));
        }
        Ok(())
    }
}

/// Folds one block observation `(m, v)` into `cell`.
///
/// A model whose variance exceeds `theta_v` first has its age scaled by
/// `exp(-decay_lambda · (variance - theta_v))`.
pub fn update_cell<T: Scalar>(
    cell: &GaussianCell<T>,
    m: T,
    v: T,
    cfg: &BgModelConfig<T>,
) -> GaussianCell<T> {
    let mut age = cell.age;
    if cell.variance > cfg.theta_v {
        age = age * (-cfg.decay_lambda * (cell.variance - cfg.theta_v)).exp();
    }
    let one = T::one();
    let keep = age / (age + one);
    let take = one / (age + one);
    GaussianCell {
        mean: keep * cell.mean + take * m,
        variance: (keep * cell.variance + take * v).max(cfg.variance_floor),
        age: age + one,
    }
}

/// Per-block observation: mean intensity and largest squared deviation from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats<T> {
    pub mean: T,
    pub max_sq_dev: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridStats<T> {
    pub cols: usize,
    pub rows: usize,
    pub cells: Vec<CellStats<T>>,
}

fn grid_dims(w: usize, h: usize, n: usize) -> (usize, usize) {
    (w.div_ceil(n), h.div_ceil(n))
}

/// Block means and max squared deviations; edge blocks are truncated to the frame.
pub fn grid_statistics<T: Scalar>(frame: &GrayImage, cfg: &BgModelConfig<T>) -> GridStats<T> {
    let n = cfg.grid_cell.max(1);
    let (w, h) = frame.dims();
    let (cols, rows) = grid_dims(w, h, n);
    let mut cells = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let (x0, y0) = (c * n, r * n);
            let (x1, y1) = ((x0 + n).min(w), (y0 + n).min(h));
            let mut sum = 0u64;
            for y in y0..y1 {
                for x in x0..x1 {
                    sum += frame.get(x, y) as u64;
                }
            }
            let count = ((x1 - x0) * (y1 - y0)) as f64;
            let mean = sum as f64 / count;
            let mut v = 0.0f64;
            for y in y0..y1 {
                for x in x0..x1 {
                    let d = mean - frame.get(x, y) as f64;
                    v = v.max(d * d);
                }
            }
            cells.push(CellStats {
                mean: T::lit(mean),
                max_sq_dev: T::lit(v),
            });
        }
    }
    GridStats { cols, rows, cells }
}

/// Stateful background model for one video stream.
#[derive(Debug, Clone)]
pub struct BackgroundModel<T> {
    cfg: BgModelConfig<T>,
    width: usize,
    height: usize,
    cols: usize,
    rows: usize,
    cells: Vec<DualCell<T>>,
    /// Sub-block camera motion not yet applied to the grid.
    residual: AffineTransform<T>,
    frames_seen: u64,
    swaps: u64,
}

impl<T: Scalar> BackgroundModel<T> {
    pub fn new(width: usize, height: usize, cfg: BgModelConfig<T>) -> Result<Self> {
        cfg.validate()?;
        if width < cfg.grid_cell || height < cfg.grid_cell {
            return Err(Error::invalid(format!(
                "frame {width}x{height} smaller than one grid cell ({})",
                cfg.grid_cell
            )));
        }
        let (cols, rows) = grid_dims(width, height, cfg.grid_cell);
        Ok(Self {
            cfg,
            width,
            height,
            cols,
            rows,
            cells: vec![DualCell::default(); cols * rows],
            residual: AffineTransform::identity(),
            frames_seen: 0,
            swaps: 0,
        })
    }

    pub fn config(&self) -> &BgModelConfig<T> {
        &self.cfg
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }

    pub fn cell(&self, col: usize, row: usize) -> &DualCell<T> {
        &self.cells[row * self.cols + col]
    }

    pub fn cell_mut(&mut self, col: usize, row: usize) -> &mut DualCell<T> {
        &mut self.cells[row * self.cols + col]
    }

    /// Total number of A/B role exchanges so far.
    pub fn swap_count(&self) -> u64 {
        self.swaps
    }

    pub fn frames_seen(&self) -> u64 {
        self.frames_seen
    }

    /// Processes one frame. `warp` maps the previous frame's coordinates into
    /// this frame's (identity for a static camera). The first frame only
    /// initializes the model and yields an empty mask.
    pub fn step(&mut self, frame: &GrayImage, warp: &AffineTransform<T>) -> Result<ForegroundMask> {
        if frame.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                actual: frame.dims(),
            });
        }
        if self.frames_seen > 0 {
            self.compensate(warp)?;
        }
        let stats = grid_statistics(frame, &self.cfg);
        let cfg = &self.cfg;
        let init_var = cfg.theta_v / T::lit(4.0);
        for (cell, obs) in self.cells.iter_mut().zip(stats.cells.iter()) {
            let (m, v) = (obs.mean, obs.max_sq_dev.max(cfg.variance_floor));
            if cell.current.age <= T::zero() {
                cell.current = GaussianCell {
                    mean: m,
                    variance: init_var,
                    age: T::one(),
                };
                cell.candidate = GaussianCell::default();
                continue;
            }
            let a = cell.current;
            let b = cell.candidate;
            if (m - a.mean).powi(2) < cfg.theta_s * a.variance {
                cell.current = update_cell(&a, m, v, cfg);
            } else if b.age > T::zero() && (m - b.mean).powi(2) < cfg.theta_s * b.variance {
                cell.candidate = update_cell(&b, m, v, cfg);
            } else {
                cell.candidate = update_cell(&GaussianCell::default(), m, v, cfg);
            }
            if cell.candidate.age > cell.current.age {
                std::mem::swap(&mut cell.current, &mut cell.candidate);
                self.swaps += 1;
            }
        }
        self.frames_seen += 1;
        if self.frames_seen == 1 {
            // the model was just built from this frame
            return Ok(ForegroundMask::empty(self.width, self.height));
        }
        Ok(self.foreground(frame))
    }

    /// Pixel test against the current model of each block.
    pub fn foreground(&self, frame: &GrayImage) -> ForegroundMask {
        let n = self.cfg.grid_cell;
        ForegroundMask::from_fn(self.width, self.height, |x, y| {
            let a = &self.cells[(y / n) * self.cols + x / n].current;
            let d = T::lit(frame.get(x, y) as f64) - a.mean;
            d * d > self.cfg.theta_d * a.variance
        })
    }

    /// Re-indexes the grid under the camera motion by nearest-block lookup.
    /// Translation is applied in whole blocks; the remainder carries over.
    fn compensate(&mut self, warp: &AffineTransform<T>) -> Result<()> {
        let total = warp.after(&self.residual);
        let n = T::from_count(self.cfg.grid_cell);
        let t = total.translation_part();
        let mut snapped = total;
        snapped.m[2] = (t.x / n).round() * n;
        snapped.m[5] = (t.y / n).round() * n;
        self.residual = total.after(&snapped.inverse()?);
        if snapped.max_abs_diff(&AffineTransform::identity()) <= T::epsilon() {
            return Ok(());
        }
        let inv = snapped.inverse()?;
        let half = n / T::lit(2.0);
        let mut next = vec![DualCell::default(); self.cells.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                let center = Point::new(T::from_count(c) * n + half, T::from_count(r) * n + half);
                let src = inv.apply(center);
                let (sc, sr) = ((src.x / n).floor(), (src.y / n).floor());
                if sc >= T::zero()
                    && sr >= T::zero()
                    && sc < T::from_count(self.cols)
                    && sr < T::from_count(self.rows)
                {
                    let (sc, sr) = (sc.to_usize().unwrap_or(0), sr.to_usize().unwrap_or(0));
                    next[r * self.cols + c] = self.cells[sr * self.cols + sc];
                }
            }
        }
        self.cells = next;
        Ok(())
    }
}

/// Boxes of the connected foreground regions left after a 3×3 opening and
/// closing, dropping regions smaller than `min_blob_area` pixels.
pub fn extract_blobs<T: Scalar>(mask: &ForegroundMask, cfg: &BgModelConfig<T>) -> Vec<BoundingBox<T>> {
    let cleaned = mask.open().close();
    cleaned
        .components()
        .into_iter()
        .filter(|c| c.pixels >= cfg.min_blob_area)
        .filter_map(|c| {
            BoundingBox::new(
                T::from_count(c.bounds.x0),
                T::from_count(c.bounds.y0),
                T::from_count(c.bounds.width()),
                T::from_count(c.bounds.height()),
            )
            .ok()
        })
        .collect()
}
