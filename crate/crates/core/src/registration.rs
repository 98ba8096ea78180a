//! Inter-frame camera motion by enhanced-correlation-coefficient alignment.
//!
//! The estimated transform maps coordinates of the previous frame into the
//! current frame: a scene point seen at `p` in `prev` appears at `t.apply(p)`
//! in `curr`.

use crate::error::{Error, Result};
use crate::geometry::{AffineTransform, BoundingBox, Point};
use crate::image::{FloatImage, GrayImage};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MotionModel {
    Translation,
    #[default]
    Affine,
}

impl MotionModel {
    fn n_params(self) -> usize {
        match self {
            MotionModel::Translation => 2,
            MotionModel::Affine => 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationConfig {
    pub pyramid_levels: usize,
    /// Iteration cap per pyramid level.
    pub max_iterations: usize,
    /// Stop once an update moves no image corner by more than this many pixels.
    pub convergence_eps: f64,
    pub model: MotionModel,
    /// Pixels whose intensity residual exceeds this many robust standard
    /// deviations are left out of each update (independently moving objects).
    /// 0 keeps every pixel.
    pub outlier_sigma: f64,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            max_iterations: 50,
            convergence_eps: 1e-4,
            model: MotionModel::Affine,
            outlier_sigma: 3.0,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels < 1 {
            return Err(Error::Config("pyramid_levels must be >= 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if !(self.convergence_eps > 0.0) {
            return Err(Error::Config("convergence_eps must be > 0".into()));
        }
        if !(self.outlier_sigma == 0.0 || self.outlier_sigma >= 1.0) {
            return Err(Error::Config("outlier_sigma must be 0 or >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one registration.
#[derive(Debug, Clone, PartialEq)]
pub struct Registration<T> {
    /// Map from previous-frame to current-frame coordinates.
    pub transform: AffineTransform<T>,
    /// False when the finest level hit `max_iterations` first; `transform` is then
    /// the best-correlation iterate seen.
    pub converged: bool,
    /// Final correlation coefficient at the finest level.
    pub correlation: T,
    pub iterations: usize,
}

const MIN_SIDE: usize = 32;
const MIN_LEVEL_SIDE: usize = 16;

/// Estimates the affine (or translation-only) motion from `prev` to `curr`.
pub fn estimate_camera_motion<T: Scalar>(
    prev: &GrayImage,
    curr: &GrayImage,
    cfg: &RegistrationConfig,
) -> Result<Registration<T>> {
    cfg.validate()?;
    prev.ensure_same_dims(curr)?;
    let (w, h) = prev.dims();
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(Error::invalid(format!(
            "registration needs frames of at least {MIN_SIDE}x{MIN_SIDE}, got {w}x{h}"
        )));
    }
    if prev == curr {
        return Ok(Registration {
            transform: AffineTransform::identity(),
            converged: true,
            correlation: T::one(),
            iterations: 0,
        });
    }

    let mut levels = 1;
    while levels < cfg.pyramid_levels
        && (w >> levels) >= MIN_LEVEL_SIDE
        && (h >> levels) >= MIN_LEVEL_SIDE
    {
        levels += 1;
    }
    let mut tmpl_pyr = vec![prev.to_float::<T>()];
    let mut img_pyr = vec![curr.to_float::<T>()];
    for _ in 1..levels {
        let t = tmpl_pyr.last().unwrap().downsample2();
        let i = img_pyr.last().unwrap().downsample2();
        tmpl_pyr.push(t);
        img_pyr.push(i);
    }

    // fine = 2 * coarse + 0.5 for 2x2-average pyramids.
    let half = T::lit(0.5);
    let up = AffineTransform {
        m: [T::lit(2.0), T::zero(), half, T::zero(), T::lit(2.0), half],
    };
    let down = up.inverse()?;

    let mut warp = AffineTransform::<T>::identity();
    let mut result = None;
    for level in (0..levels).rev() {
        let tmpl = tmpl_pyr[level].smooth3();
        let img = img_pyr[level].smooth3();
        let r = align_level(&tmpl, &img, warp, cfg);
        warp = r.transform;
        if level > 0 {
            warp = up.after(&warp.after(&down));
        }
        result = Some(r);
    }
    Ok(result.expect("at least one pyramid level"))
}

fn align_level<T: Scalar>(
    tmpl: &FloatImage<T>,
    img: &FloatImage<T>,
    init: AffineTransform<T>,
    cfg: &RegistrationConfig,
) -> Registration<T> {
    let np = cfg.model.n_params();
    let (gx, gy) = img.gradients();
    let (w, h) = (tmpl.width, tmpl.height);
    let corners = [
        Point::new(T::zero(), T::zero()),
        Point::new(T::from_count(w - 1), T::zero()),
        Point::new(T::zero(), T::from_count(h - 1)),
        Point::new(T::from_count(w - 1), T::from_count(h - 1)),
    ];

    let mut warp = init;
    let mut best = (T::neg_infinity(), init);
    let mut iterations = 0;
    let mut converged = false;

    // Scratch buffers reused across iterations.
    let n_px = w * h;
    let mut tv: Vec<T> = Vec::with_capacity(n_px);
    let mut iv: Vec<T> = Vec::with_capacity(n_px);
    let mut jac: Vec<[T; 6]> = Vec::with_capacity(n_px);

    while iterations < cfg.max_iterations {
        iterations += 1;
        tv.clear();
        iv.clear();
        jac.clear();
        for y in 0..h {
            for x in 0..w {
                let (xf, yf) = (T::from_count(x), T::from_count(y));
                let p = warp.apply(Point::new(xf, yf));
                let Some(val) = img.sample(p.x, p.y) else {
                    continue;
                };
                let gxv = gx.sample(p.x, p.y).unwrap_or_else(T::zero);
                let gyv = gy.sample(p.x, p.y).unwrap_or_else(T::zero);
                tv.push(tmpl.get(x, y));
                iv.push(val);
                let mut j = [T::zero(); 6];
                match cfg.model {
                    MotionModel::Translation => {
                        j[0] = gxv;
                        j[1] = gyv;
                    }
                    MotionModel::Affine => {
                        j = [gxv * xf, gxv * yf, gxv, gyv * xf, gyv * yf, gyv];
                    }
                }
                jac.push(j);
            }
        }
        if cfg.outlier_sigma > 0.0 {
            reject_outliers(&mut tv, &mut iv, &mut jac, T::lit(cfg.outlier_sigma));
        }
        if tv.len() < 2 * np + 2 {
            break;
        }
        let n = T::from_count(tv.len());
        let tmean = tv.iter().copied().sum::<T>() / n;
        let imean = iv.iter().copied().sum::<T>() / n;

        let mut hess = [[T::zero(); 6]; 6];
        let mut img_proj = [T::zero(); 6];
        let mut tmpl_proj = [T::zero(); 6];
        let (mut img_norm2, mut tmpl_norm2, mut corr) = (T::zero(), T::zero(), T::zero());
        for k in 0..tv.len() {
            let t0 = tv[k] - tmean;
            let i0 = iv[k] - imean;
            img_norm2 = img_norm2 + i0 * i0;
            tmpl_norm2 = tmpl_norm2 + t0 * t0;
            corr = corr + i0 * t0;
            let j = &jac[k];
            for a in 0..np {
                img_proj[a] = img_proj[a] + j[a] * i0;
                tmpl_proj[a] = tmpl_proj[a] + j[a] * t0;
                for b in a..np {
                    hess[a][b] = hess[a][b] + j[a] * j[b];
                }
            }
        }
        for a in 0..np {
            for b in 0..a {
                hess[a][b] = hess[b][a];
            }
        }
        let denom = (img_norm2 * tmpl_norm2).sqrt();
        if denom <= T::zero() {
            break;
        }
        let rho = corr / denom;
        if rho > best.0 {
            best = (rho, warp);
        }

        let Some(hinv_img) = solve_spd(&hess, &img_proj, np) else {
            break;
        };
        let dot = |a: &[T; 6], b: &[T; 6]| (0..np).fold(T::zero(), |s, k| s + a[k] * b[k]);
        let lambda_n = img_norm2 - dot(&img_proj, &hinv_img);
        let lambda_d = corr - dot(&tmpl_proj, &hinv_img);
        if lambda_d <= T::zero() {
            break;
        }
        let lambda = lambda_n / lambda_d;

        let mut err_proj = [T::zero(); 6];
        for k in 0..tv.len() {
            let e = lambda * (tv[k] - tmean) - (iv[k] - imean);
            let j = &jac[k];
            for a in 0..np {
                err_proj[a] = err_proj[a] + j[a] * e;
            }
        }
        let Some(delta) = solve_spd(&hess, &err_proj, np) else {
            break;
        };
        let step = match cfg.model {
            MotionModel::Translation => {
                let z = T::zero();
                AffineTransform {
                    m: [z, z, delta[0], z, z, delta[1]],
                }
            }
            MotionModel::Affine => AffineTransform { m: delta },
        };
        for k in 0..6 {
            warp.m[k] = warp.m[k] + step.m[k];
        }
        let moved = corners
            .iter()
            .map(|c| {
                let d = step.apply(*c);
                d.x.hypot(d.y)
            })
            .fold(T::zero(), T::max);
        if moved < T::lit(cfg.convergence_eps) {
            converged = true;
            break;
        }
    }

    if converged {
        let rho = correlation_at(tmpl, img, &warp);
        Registration {
            transform: warp,
            converged,
            correlation: rho,
            iterations,
        }
    } else {
        let rho = correlation_at(tmpl, img, &warp);
        let (transform, correlation) = if rho >= best.0 {
            (warp, rho)
        } else {
            (best.1, best.0)
        };
        Registration {
            transform,
            converged,
            correlation,
            iterations,
        }
    }
}

/// Drops samples whose residual from the best linear intensity fit of `iv`
/// on `tv` lies beyond `k` robust (MAD) standard deviations.
fn reject_outliers<T: Scalar>(tv: &mut Vec<T>, iv: &mut Vec<T>, jac: &mut Vec<[T; 6]>, k: T) {
    if tv.len() < 16 {
        return;
    }
    let n = T::from_count(tv.len());
    let tm = tv.iter().copied().sum::<T>() / n;
    let im = iv.iter().copied().sum::<T>() / n;
    let (mut c, mut v) = (T::zero(), T::zero());
    for (t, i) in tv.iter().zip(iv.iter()) {
        c = c + (*t - tm) * (*i - im);
        v = v + (*t - tm) * (*t - tm);
    }
    let gain = if v > T::zero() { c / v } else { T::zero() };
    let resid: Vec<T> = tv
        .iter()
        .zip(iv.iter())
        .map(|(t, i)| (*i - im) - gain * (*t - tm))
        .collect();
    let median = |xs: &mut Vec<T>| {
        let mid = xs.len() / 2;
        *xs.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal)).1
    };
    let med = median(&mut resid.clone());
    let mut dev: Vec<T> = resid.iter().map(|r| (*r - med).abs()).collect();
    let sigma = T::lit(1.4826) * median(&mut dev);
    if !(sigma > T::zero()) {
        return;
    }
    let bound = k * sigma;
    let mut w = 0;
    for r in 0..resid.len() {
        if (resid[r] - med).abs() <= bound {
            tv[w] = tv[r];
            iv[w] = iv[r];
            jac[w] = jac[r];
            w += 1;
        }
    }
    tv.truncate(w);
    iv.truncate(w);
    jac.truncate(w);
}

fn correlation_at<T: Scalar>(tmpl: &FloatImage<T>, img: &FloatImage<T>, warp: &AffineTransform<T>) -> T {
    let mut pairs = Vec::new();
    for y in 0..tmpl.height {
        for x in 0..tmpl.width {
            let p = warp.apply(Point::new(T::from_count(x), T::from_count(y)));
            if let Some(v) = img.sample(p.x, p.y) {
                pairs.push((tmpl.get(x, y), v));
            }
        }
    }
    if pairs.is_empty() {
        return T::zero();
    }
    let n = T::from_count(pairs.len());
    let tm = pairs.iter().map(|p| p.0).sum::<T>() / n;
    let im = pairs.iter().map(|p| p.1).sum::<T>() / n;
    let (mut c, mut a, mut b) = (T::zero(), T::zero(), T::zero());
    for (t, i) in pairs {
        c = c + (t - tm) * (i - im);
        a = a + (t - tm) * (t - tm);
        b = b + (i - im) * (i - im);
    }
    let d = (a * b).sqrt();
    if d > T::zero() {
        c / d
    } else {
        T::zero()
    }
}

/// Solves `A x = b` for the leading `n×n` block of a symmetric positive-definite `A`.
fn solve_spd<T: Scalar>(a: &[[T; 6]; 6], b: &[T; 6], n: usize) -> Option<[T; 6]> {
    let mut l = [[T::zero(); 6]; 6];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s = s - l[i][k] * l[j][k];
            }
            if i == j {
                if s <= T::zero() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [T::zero(); 6];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [T::zero(); 6];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s = s - l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}

/// Moves the box center through `t`, keeping its extents.
pub fn stabilize_box<T: Scalar>(b: &BoundingBox<T>, t: &AffineTransform<T>) -> BoundingBox<T> {
    b.recentered(t.apply(b.center()))
}

/// Per-frame transforms (frame `k-1` → frame `k`) with composition over gaps.
#[derive(Debug, Clone, Default)]
pub struct WarpChain<T> {
    /// `steps[k]` maps frame `k` to frame `k + 1` (0-based frame positions).
    steps: Vec<AffineTransform<T>>,
}

impl<T: Scalar> WarpChain<T> {
    pub fn new() -> Self {
        Self { steps: Vec::new() }
    }

    pub fn identity(n_frames: usize) -> Self {
        Self {
            steps: vec![AffineTransform::identity(); n_frames.saturating_sub(1)],
        }
    }

    pub fn from_steps(steps: Vec<AffineTransform<T>>) -> Self {
        Self { steps }
    }

    pub fn push(&mut self, step: AffineTransform<T>) {
        self.steps.push(step);
    }

    pub fn steps(&self) -> &[AffineTransform<T>] {
        &self.steps
    }

    /// Map from 0-based frame `from` to frame `to` (`from <= to`); `None` if out of range.
    pub fn between(&self, from: usize, to: usize) -> Option<AffineTransform<T>> {
        if from > to || to > self.steps.len() {
            return None;
        }
        Some(
            self.steps[from..to]
                .iter()
                .fold(AffineTransform::identity(), |acc, s| s.after(&acc)),
        )
    }
}
