//! Per-object motion-state judgment for the detection-based branch.
//!
//! Two pieces of evidence are mixed into a stillness score Θ in `[0, 1]`:
//! the similarity of the background around the object between frames `t-n`
//! and `t` (structural similarity over four surrounding strips), and the
//! camera-stabilized displacement of the box over the same gap. Θ above the
//! threshold means the object is stationary.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{mahalanobis_distance, BoundingBox};
use crate::image::{resize_region, GrayImage};
use crate::registration::{stabilize_box, WarpChain};
use crate::scalar::Scalar;
use crate::track::MotionState;

/// How the stationary displacement bound β_d is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaRule<T> {
    /// Fraction of the smaller frame dimension.
    Relative(T),
    /// Fixed number of pixels.
    Absolute(T),
}

impl<T: Scalar> BetaRule<T> {
    pub fn resolve(&self, width: usize, height: usize) -> T {
        match *self {
            BetaRule::Relative(f) => f * T::from_count(width.min(height)),
            BetaRule::Absolute(px) => px,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JudgeConfig<T> {
    /// Frame gap n between the compared observations.
    pub frame_gap: usize,
    /// Weight of background similarity against displacement.
    pub lambda: T,
    pub beta_d: BetaRule<T>,
    /// Strip size after resizing, `(width, height)`.
    pub patch_size: (usize, usize),
    /// Strips whose outer edge comes closer than this to the frame border are dropped.
    pub boundary_margin: usize,
    pub r1: T,
    pub r2: T,
    /// Θ above this is stationary.
    pub theta_threshold: T,
}

impl<T: Scalar> Default for JudgeConfig<T> {
    fn default() -> Self {
        Self {
            frame_gap: 3,
            lambda: T::lit(0.3),
            beta_d: BetaRule::Relative(T::lit(0.01)),
            patch_size: (256, 192),
            boundary_margin: 15,
            r1: T::lit(6.5025),
            r2: T::lit(58.5225),
            theta_threshold: T::lit(0.5),
        }
    }
}

impl<T: Scalar> JudgeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let (z, o) = (T::zero(), T::one());
        if self.frame_gap < 1 {
            return Err(Error::Config("frame_gap must be >= 1".into()));
        }
        if !(self.lambda >= z && self.lambda <= o) {
            return Err(Error::Config(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        let beta_ok = match self.beta_d {
            BetaRule::Relative(f) => f > z,
            BetaRule::Absolute(px) => px > z,
        };
        if !beta_ok {
            return Err(Error::Config("beta_d must be > 0".into()));
        }
        if self.patch_size.0 == 0 || self.patch_size.1 == 0 {
            return Err(Error::Config("patch size must be positive".into()));
        }
        if !(self.r1 > z && self.r2 > z) {
            return Err(Error::Config("r1 and r2 must be > 0".into()));
        }
        if !(self.theta_threshold > z && self.theta_threshold < o) {
            return Err(Error::Config("theta_threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Strip order inside a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Above = 0,
    Below = 1,
    Left = 2,
    Right = 3,
}

pub const SIDES: [Side; 4] = [Side::Above, Side::Below, Side::Left, Side::Right];

/// Four background strips around a box, each resized to the patch size and
/// stacked in `SIDES` order. Discarded strips are zero-filled and flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundPatch<T> {
    pub strip_len: usize,
    pub data: Vec<T>,
    pub valid: [bool; 4],
}

impl<T: Scalar> BackgroundPatch<T> {
    pub fn is_empty(&self) -> bool {
        !self.valid.iter().any(|&v| v)
    }

    pub fn strip(&self, side: Side) -> &[T] {
        let i = side as usize;
        &self.data[i * self.strip_len..(i + 1) * self.strip_len]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }
}

/// Crops the strips above, below, left and right of `b` (each as thick as the
/// box's extent in that direction), drops any that reach within
/// `boundary_margin` pixels of the frame border, and resizes the rest.
pub fn extract_background_patch<T: Scalar>(
    frame: &GrayImage,
    b: &BoundingBox<T>,
    cfg: &JudgeConfig<T>,
) -> BackgroundPatch<T> {
    let (pw, ph) = cfg.patch_size;
    let strip_len = pw * ph;
    let mut patch = BackgroundPatch {
        strip_len,
        data: vec![T::zero(); 4 * strip_len],
        valid: [false; 4],
    };
    let (fw, fh) = (frame.width() as i64, frame.height() as i64);
    let x0 = b.x.as_f64().round() as i64;
    let y0 = b.y.as_f64().round() as i64;
    let x1 = (b.right().as_f64().round() as i64).max(x0 + 1);
    let y1 = (b.bottom().as_f64().round() as i64).max(y0 + 1);
    let (bw, bh) = (x1 - x0, y1 - y0);
    let margin = cfg.boundary_margin as i64;

    for side in SIDES {
        // Unclipped strip rectangle.
        let (sx0, sy0, sx1, sy1) = match side {
            Side::Above => (x0, y0 - bh, x1, y0),
            Side::Below => (x0, y1, x1, y1 + bh),
            Side::Left => (x0 - bw, y0, x0, y1),
            Side::Right => (x1, y0, x1 + bw, y1),
        };
        let (cx0, cy0) = (sx0.max(0), sy0.max(0));
        let (cx1, cy1) = (sx1.min(fw), sy1.min(fh));
        if cx0 >= cx1 || cy0 >= cy1 {
            continue;
        }
        let outer_gap = match side {
            Side::Above => cy0,
            Side::Below => fh - cy1,
            Side::Left => cx0,
            Side::Right => fw - cx1,
        };
        if outer_gap < margin {
            continue;
        }
        let strip = resize_region::<T>(
            frame,
            cx0 as usize,
            cy0 as usize,
            (cx1 - cx0) as usize,
            (cy1 - cy0) as usize,
            pw,
            ph,
        );
        let i = side as usize;
        patch.data[i * strip_len..(i + 1) * strip_len].copy_from_slice(&strip);
        patch.valid[i] = true;
    }
    patch
}

/// Global structural similarity over the strips valid in both patches.
/// `None` when no strip is valid in both.
pub fn ssim<T: Scalar>(p1: &BackgroundPatch<T>, p2: &BackgroundPatch<T>, r1: T, r2: T) -> Option<T> {
    if p1.strip_len != p2.strip_len {
        return None;
    }
    let common: Vec<Side> = SIDES
        .into_iter()
        .filter(|s| p1.valid[*s as usize] && p2.valid[*s as usize])
        .collect();
    if common.is_empty() {
        return None;
    }
    let n = T::from_count(common.len() * p1.strip_len);
    let pairs = || {
        common
            .iter()
            .flat_map(|s| p1.strip(*s).iter().copied().zip(p2.strip(*s).iter().copied()))
    };
    let (s1, s2) = pairs().fold((T::zero(), T::zero()), |(a, b), (u, v)| (a + u, b + v));
    let (mu1, mu2) = (s1 / n, s2 / n);
    let (mut v1, mut v2, mut cov) = (T::zero(), T::zero(), T::zero());
    for (u, v) in pairs() {
        let (du, dv) = (u - mu1, v - mu2);
        v1 = v1 + du * du;
        v2 = v2 + dv * dv;
        cov = cov + du * dv;
    }
    let (v1, v2, cov) = (v1 / n, v2 / n, cov / n);
    let two = T::lit(2.0);
    Some(
        ((two * mu1 * mu2 + r1) * (two * cov + r2))
            / ((mu1 * mu1 + mu2 * mu2 + r1) * (v1 + v2 + r2)),
    )
}

/// Displacement score: 1 at rest, falling linearly to 0 at `beta_d` and beyond.
pub fn motion_score<T: Scalar>(d: T, beta_d: T) -> T {
    if d <= beta_d {
        T::one() - d / beta_d
    } else {
        T::zero()
    }
}

/// Box displacement in pixels: the Mahalanobis distance between the centers
/// (covariance from the reference box's half-extents) rescaled by the
/// reference box's geometric-mean half-extent `sqrt(w·h)/2`.
///
/// For square reference boxes this is exactly the center distance; for
/// elongated boxes motion along the short side weighs more.
pub fn displacement_pixels<T: Scalar>(reference: &BoundingBox<T>, other: &BoundingBox<T>) -> Result<T> {
    let d = mahalanobis_distance(reference, other)?;
    Ok(d * (reference.w * reference.h).sqrt() / T::lit(2.0))
}

/// Θ with its components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionVerdict<T> {
    pub theta: T,
    /// Background similarity clamped to `[0, 1]`; `None` when no strip pair was usable.
    pub a_a: Option<T>,
    pub a_m: T,
    pub label: MotionState,
}

impl<T: Scalar> MotionVerdict<T> {
    /// Verdict for a track that cannot be judged yet.
    pub fn unknown() -> Self {
        Self {
            theta: T::zero(),
            a_a: None,
            a_m: T::zero(),
            label: MotionState::Unknown,
        }
    }

    pub fn is_known(&self) -> bool {
        self.label.is_known()
    }
}

/// Mixes the evidence into a verdict: `Θ = λ·A_a + (1-λ)·A_m`, or `Θ = A_m`
/// when `A_a` is unavailable.
pub fn combine<T: Scalar>(a_a: Option<T>, a_m: T, lambda: T, threshold: T) -> MotionVerdict<T> {
    let a_a = a_a.map(Scalar::clamp01);
    let theta = match a_a {
        Some(a) => lambda * a + (T::one() - lambda) * a_m,
        None => a_m,
    };
    MotionVerdict {
        theta,
        a_a,
        a_m,
        label: if theta > threshold {
            MotionState::Static
        } else {
            MotionState::Moving
        },
    }
}

/// Judge bound to one video's frame size.
#[derive(Debug, Clone)]
pub struct Judge<T> {
    cfg: JudgeConfig<T>,
    beta_d: T,
}

impl<T: Scalar> Judge<T> {
    pub fn new(cfg: JudgeConfig<T>, frame_width: usize, frame_height: usize) -> Result<Self> {
        cfg.validate()?;
        let beta_d = cfg.beta_d.resolve(frame_width, frame_height);
        if !(beta_d > T::zero()) {
            return Err(Error::Config("resolved beta_d must be > 0".into()));
        }
        Ok(Self { cfg, beta_d })
    }

    pub fn config(&self) -> &JudgeConfig<T> {
        &self.cfg
    }

    pub fn beta_d(&self) -> T {
        self.beta_d
    }

    pub fn patch(&self, frame: &GrayImage, b: &BoundingBox<T>) -> BackgroundPatch<T> {
        extract_background_patch(frame, b, &self.cfg)
    }

    /// Verdict from an already stabilized older box and precomputed patches.
    pub fn verdict(
        &self,
        old_stabilized: &BoundingBox<T>,
        new: &BoundingBox<T>,
        old_patch: &BackgroundPatch<T>,
        new_patch: &BackgroundPatch<T>,
    ) -> Result<MotionVerdict<T>> {
        let d = displacement_pixels(old_stabilized, new)?;
        let a_m = motion_score(d, self.beta_d);
        let a_a = ssim(old_patch, new_patch, self.cfg.r1, self.cfg.r2);
        Ok(combine(a_a, a_m, self.cfg.lambda, self.cfg.theta_threshold))
    }

    /// Judges one track at 1-based `frame`. `history` holds the track's
    /// `(frame, box)` observations; `frames[k]` is frame `k + 1`; `warps`
    /// chains consecutive frames.
    pub fn judge_track(
        &self,
        history: &[(u32, BoundingBox<T>)],
        frame: u32,
        frames: &[GrayImage],
        warps: &WarpChain<T>,
    ) -> Result<MotionVerdict<T>> {
        let gap = self.cfg.frame_gap as u32;
        if frame <= gap {
            return Ok(MotionVerdict::unknown());
        }
        let old_frame = frame - gap;
        let find = |f: u32| history.iter().find(|(k, _)| *k == f).map(|(_, b)| *b);
        let (Some(old), Some(new)) = (find(old_frame), find(frame)) else {
            return Ok(MotionVerdict::unknown());
        };
        let (oi, ni) = (old_frame as usize - 1, frame as usize - 1);
        let (Some(old_img), Some(new_img)) = (frames.get(oi), frames.get(ni)) else {
            return Err(Error::invalid(format!("frame {frame} or {old_frame} not available")));
        };
        let Some(warp) = warps.between(oi, ni) else {
            return Err(Error::invalid(format!(
                "no camera motion between frames {old_frame} and {frame}"
            )));
        };
        let stabilized = stabilize_box(&old, &warp);
        self.verdict(&stabilized, &new, &self.patch(old_img, &old), &self.patch(new_img, &new))
    }
}

/// Memoizes background patches by `(track_id, frame)` so each observation is
/// cropped once even though it is compared at `t` and again at `t + n`.
#[derive(Debug, Default)]
pub struct PatchCache<T> {
    patches: HashMap<(u32, u32), BackgroundPatch<T>>,
}

impl<T: Scalar> PatchCache<T> {
    pub fn new() -> Self {
        Self {
            patches: HashMap::new(),
        }
    }

    pub fn get_or_insert(
        &mut self,
        judge: &Judge<T>,
        track_id: u32,
        frame: u32,
        image: &GrayImage,
        b: &BoundingBox<T>,
    ) -> &BackgroundPatch<T> {
        self.patches
            .entry((track_id, frame))
            .or_insert_with(|| judge.patch(image, b))
    }

    /// Drops patches of frames older than `frame`.
    pub fn evict_before(&mut self, frame: u32) {
        self.patches.retain(|(_, f), _| *f >= frame);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::texture::ValueNoise;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn small_cfg() -> JudgeConfig<f64> {
        JudgeConfig {
            patch_size: (16, 12),
            ..Default::default()
        }
    }

    fn textured(w: usize, h: usize) -> GrayImage {
        let tex = ValueNoise::new(5, 10.0);
        GrayImage::from_fn(w, h, |x, y| tex.sample(x as f64, y as f64).round() as u8)
    }

    fn bb(x: f64, y: f64, w: f64, h: f64) -> BoundingBox<f64> {
        BoundingBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn centered_box_has_four_strips() {
        let img = textured(200, 200);
        let p = extract_background_patch(&img, &bb(90.0, 90.0, 20.0, 20.0), &small_cfg());
        assert_eq!(p.valid, [true; 4]);
        assert_eq!(p.data.len(), 4 * 16 * 12);
    }

    #[test]
    fn strip_near_top_border_is_dropped() {
        let img = textured(200, 200);
        let p = extract_background_patch(&img, &bb(90.0, 10.0, 20.0, 20.0), &small_cfg());
        assert_eq!(p.valid, [false, true, true, true]);
        assert!(p.strip(Side::Above).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn box_filling_frame_gives_empty_patch() {
        let img = textured(40, 30);
        let p = extract_background_patch(&img, &bb(0.0, 0.0, 40.0, 30.0), &small_cfg());
        assert!(p.is_empty());
        assert_eq!(ssim(&p, &p, 1e-4, 1e-4), None);
    }

    fn constant_patch(v: f64, len: usize) -> BackgroundPatch<f64> {
        BackgroundPatch {
            strip_len: len,
            data: vec![v; 4 * len],
            valid: [true; 4],
        }
    }

    #[test]
    fn ssim_examples() {
        let img = textured(200, 200);
        let p = extract_background_patch(&img, &bb(90.0, 90.0, 20.0, 20.0), &small_cfg());
        assert_abs_diff_eq!(ssim(&p, &p, 1e-4, 1e-4).unwrap(), 1.0, epsilon = 1e-12);

        let zero = constant_patch(0.0, 10);
        let hundred = constant_patch(100.0, 10);
        let expect = (1e-4 * 1e-4) / ((10000.0 + 1e-4) * 1e-4);
        assert_abs_diff_eq!(ssim(&zero, &hundred, 1e-4, 1e-4).unwrap(), expect, epsilon = 1e-15);

        let mut inverted = p.clone();
        for v in &mut inverted.data[..p.strip_len] {
            *v = 255.0 - *v;
        }
        assert!(ssim(&p, &inverted, 1e-4, 1e-4).unwrap() < ssim(&p, &p, 1e-4, 1e-4).unwrap());
    }

    #[test]
    fn motion_score_examples() {
        assert_eq!(motion_score(0.0, 4.0), 1.0);
        assert_eq!(motion_score(4.0, 4.0), 0.0);
        assert_eq!(motion_score(2.0, 4.0), 0.5);
        assert_eq!(motion_score(9.0, 4.0), 0.0);
    }

    #[test]
    fn lambda_endpoints() {
        let v0 = combine(Some(0.2), 0.9, 0.0, 0.5);
        assert_eq!(v0.theta, 0.9);
        let v1 = combine(Some(0.2), 0.9, 1.0, 0.5);
        assert_eq!(v1.theta, 0.2);
        assert_eq!(v1.label, MotionState::Moving);
        // unavailable similarity falls back to the displacement score
        assert_eq!(combine(None, 0.7, 0.5, 0.5).theta, 0.7);
        // negative similarity clamps to zero
        assert_eq!(combine(Some(-0.4), 1.0, 0.5, 0.5).theta, 0.5);
    }

    #[test]
    fn static_box_in_static_scene_is_stationary() {
        let img = textured(200, 160);
        let frames = vec![img.clone(), img.clone(), img.clone(), img];
        let judge = Judge::new(JudgeConfig { lambda: 0.5, ..small_cfg() }, 200, 160).unwrap();
        let b = bb(80.0, 60.0, 24.0, 24.0);
        let history: Vec<_> = (1..=4).map(|f| (f, b)).collect();
        let v = judge
            .judge_track(&history, 4, &frames, &WarpChain::identity(4))
            .unwrap();
        assert_abs_diff_eq!(v.a_m, 1.0);
        assert_abs_diff_eq!(v.a_a.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v.theta, 1.0, epsilon = 1e-12);
        assert_eq!(v.label, MotionState::Static);
    }

    #[test]
    fn fast_box_is_moving_and_young_track_unknown() {
        let img = textured(200, 160);
        let frames = vec![img; 4];
        let judge = Judge::new(JudgeConfig { lambda: 0.0, ..small_cfg() }, 200, 160).unwrap();
        let beta = judge.beta_d();
        assert_abs_diff_eq!(beta, 1.6);
        let history: Vec<_> = (1..=4)
            .map(|f| (f, bb(60.0 + 2.0 * beta * f as f64 / 3.0, 60.0, 20.0, 20.0)))
            .collect();
        let v = judge
            .judge_track(&history, 4, &frames, &WarpChain::identity(4))
            .unwrap();
        assert_eq!(v.theta, 0.0);
        assert_eq!(v.label, MotionState::Moving);
        let young = judge
            .judge_track(&history, 3, &frames, &WarpChain::identity(4))
            .unwrap();
        assert_eq!(young.label, MotionState::Unknown);
    }

    #[test]
    fn displacement_is_center_distance_for_squares() {
        let a = bb(0.0, 0.0, 10.0, 10.0);
        let b = bb(3.0, 4.0, 10.0, 10.0);
        assert_abs_diff_eq!(displacement_pixels(&a, &b).unwrap(), 5.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn theta_bounded_and_monotone(a in -1.0..1.0f64, m in 0.0..1.0f64, lambda in 0.0..1.0f64,
                                      da in 0.0..0.5f64, dm in 0.0..0.5f64) {
            let v = combine(Some(a), m, lambda, 0.5);
            prop_assert!((0.0..=1.0).contains(&v.theta));
            let up = combine(Some(a + da), (m + dm).min(1.0), lambda, 0.5);
            prop_assert!(up.theta >= v.theta - 1e-12);
            let aa = a.clamp(0.0, 1.0);
            prop_assert_eq!(v.theta, lambda * aa + (1.0 - lambda) * m);
        }
    }
}
