//! Fusion of the deep and traditional branches: effectiveness assessment of
//! the traditional branch, box fusion and stillness-score fusion.

use crate::assignment::max_weight_matching;
use crate::error::{Error, Result};
use crate::geometry::{iou, BoundingBox};
use crate::judge::MotionVerdict;
use crate::mask::ForegroundMask;
use crate::scalar::Scalar;
use crate::track::{MotionState, TrackRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig<T> {
    /// MOTA of the traditional branch measured beforehand on similar data.
    pub prior_mota: Option<T>,
    /// Prior MOTA above which the traditional branch is trusted.
    pub mota_gate: T,
    /// Foreground fraction above which the traditional branch is considered broken.
    pub max_fg_ratio: T,
    /// Chebyshev radius joining motion pixels into one component.
    pub component_radius: usize,
    /// Component mass threshold as a fraction of the box area.
    pub s_min_fraction: T,
    /// Human confidence in the deep branch for box fusion.
    pub alpha_b: T,
    /// MOTA of the deep branch used for box weights.
    pub mota_deep: T,
    /// MVF1 of the deep branch used for stillness weights.
    pub mvf1_deep: T,
    /// Motion-pixel ratio at which the traditional stillness score saturates.
    pub r: T,
    /// IoU gate for associating deep and traditional boxes.
    pub assoc_iou_gate: T,
    /// Θ above this is stationary.
    pub theta_threshold: T,
}

impl<T: Scalar> Default for FusionConfig<T> {
    fn default() -> Self {
        Self {
            prior_mota: None,
            mota_gate: T::lit(0.25),
            max_fg_ratio: T::lit(0.5),
            component_radius: 1,
            s_min_fraction: T::lit(0.2),
            alpha_b: T::lit(0.5),
            mota_deep: T::lit(0.5),
            mvf1_deep: T::one(),
            r: T::lit(0.2),
            assoc_iou_gate: T::lit(0.3),
            theta_threshold: T::lit(0.5),
        }
    }
}

impl<T: Scalar> FusionConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let (z, o) = (T::zero(), T::one());
        let unit = |v: T| v >= z && v <= o;
        let open = |v: T| v > z && v < o;
        if let Some(p) = self.prior_mota {
            if !(p <= o) {
                return Err(Error::Config(format!("prior_mota {p} must be <= 1")));
            }
        }
        if !unit(self.mota_gate) || !unit(self.max_fg_ratio) || !unit(self.s_min_fraction) {
            return Err(Error::Config("mota_gate, max_fg_ratio and s_min_fraction must lie in [0, 1]".into()));
        }
        if self.component_radius < 1 {
            return Err(Error::Config("component_radius must be >= 1".into()));
        }
        if !unit(self.alpha_b) || !unit(self.mota_deep) {
            return Err(Error::Config("alpha_b and mota_deep must lie in [0, 1]".into()));
        }
        if !(self.mvf1_deep > z && self.mvf1_deep <= o) {
            return Err(Error::Config("mvf1_deep must lie in (0, 1]".into()));
        }
        if !(self.r > z && self.r <= o) {
            return Err(Error::Config(format!("R {} outside (0, 1]", self.r)));
        }
        if !open(self.assoc_iou_gate) || !open(self.theta_threshold) {
            return Err(Error::Config("assoc_iou_gate and theta_threshold must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// MVF1 credited to the traditional branch: 1 when its prior MOTA reaches
    /// the gate, 0.2 otherwise (including when no prior is known).
    pub fn mvf1_traditional(&self) -> T {
        match self.prior_mota {
            Some(p) if p >= self.mota_gate => T::one(),
            _ => T::lit(0.2),
        }
    }

    /// MOTA of the traditional branch for box weights; the gate value stands
    /// in when no prior is known.
    pub fn mota_traditional(&self) -> T {
        self.prior_mota.unwrap_or(self.mota_gate).max(T::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Effectiveness {
    Effective,
    Ineffective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxAssessment {
    /// Components heavier than `S_min` inside the box.
    pub components: usize,
    pub verdict: Effectiveness,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectivenessReport<T> {
    /// Whether a known prior MOTA exceeds the gate.
    pub mota_gate_passed: bool,
    pub fg_ratio: T,
    /// One entry per traditional box, in input order.
    pub per_box: Vec<BoxAssessment>,
    pub global: Effectiveness,
}

/// Number of motion-pixel components inside `b` whose mass exceeds
/// `s_min_fraction` of the box area.
pub fn count_components<T: Scalar>(mask: &ForegroundMask, b: &BoundingBox<T>, cfg: &FusionConfig<T>) -> usize {
    let Some(rect) = mask.clip_rect(b.x.as_f64(), b.y.as_f64(), b.w.as_f64(), b.h.as_f64()) else {
        return 0;
    };
    let s_min = cfg.s_min_fraction * b.area();
    mask.components_in(rect, cfg.component_radius)
        .iter()
        .filter(|c| T::from_count(c.pixels) > s_min)
        .count()
}

/// Decides whether the traditional branch can be trusted in this frame, and
/// for each of its boxes whether the box covers a single object.
pub fn assess_effectiveness<T: Scalar>(
    mask: &ForegroundMask,
    tra_boxes: &[BoundingBox<T>],
    cfg: &FusionConfig<T>,
) -> EffectivenessReport<T> {
    let fg_ratio = T::lit(mask.ratio());
    let mota_gate_passed = cfg.prior_mota.is_some_and(|p| p > cfg.mota_gate);
    let global = if fg_ratio > cfg.max_fg_ratio {
        Effectiveness::Ineffective
    } else if cfg.prior_mota.is_none() || mota_gate_passed {
        Effectiveness::Effective
    } else {
        Effectiveness::Ineffective
    };
    let per_box = tra_boxes
        .iter()
        .map(|b| {
            let components = count_components(mask, b, cfg);
            BoxAssessment {
                components,
                verdict: if components >= 2 {
                    Effectiveness::Ineffective
                } else {
                    Effectiveness::Effective
                },
            }
        })
        .collect();
    EffectivenessReport {
        mota_gate_passed,
        fg_ratio,
        per_box,
        global,
    }
}

/// Box weights `(deep, traditional)` from the branches' MOTA and the deep
/// confidence `alpha`, rescaled to sum to one.
pub fn compute_box_weights<T: Scalar>(mota_tra: T, mota_deep: T, alpha: T) -> Result<(T, T)> {
    let z = T::zero();
    if !(mota_tra >= z && mota_deep >= z) {
        return Err(Error::invalid("MOTA values for box weights must be >= 0"));
    }
    if !(alpha >= z && alpha <= T::one()) {
        return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
    }
    let total = mota_tra + mota_deep;
    if total == z {
        return Err(Error::Degenerate("both MOTA values are zero".into()));
    }
    let deep = alpha * mota_deep / total;
    let tra = (T::one() - alpha) * mota_tra / total;
    let sum = deep + tra;
    if sum == z {
        return Err(Error::Degenerate("box weights vanish".into()));
    }
    Ok((deep / sum, tra / sum))
}

/// Coordinate-wise weighted average; the deep box is returned unchanged when
/// there is no traditional counterpart.
pub fn fuse_boxes<T: Scalar>(b_deep: &BoundingBox<T>, b_tra: Option<&BoundingBox<T>>, w: (T, T)) -> BoundingBox<T> {
    let Some(t) = b_tra else {
        return *b_deep;
    };
    // d + w_tra·(t − d) equals w_deep·d + w_tra·t for unit-sum weights and
    // reproduces agreeing coordinates exactly
    let wt = w.1;
    let mix = |d: T, t: T| d + wt * (t - d);
    BoundingBox {
        x: mix(b_deep.x, t.x),
        y: mix(b_deep.y, t.y),
        w: mix(b_deep.w, t.w),
        h: mix(b_deep.h, t.h),
        ..*b_deep
    }
}

/// Stillness score contributed by the traditional branch. When the branch is
/// effective it is 0 for a matched box and 1 otherwise; when it is not, it
/// grows with the motion-pixel ratio inside the box and saturates at `r`.
pub fn theta_traditional<T: Scalar>(
    b: &BoundingBox<T>,
    mask: &ForegroundMask,
    effective: bool,
    matched: bool,
    r: T,
) -> T {
    if effective {
        return if matched { T::zero() } else { T::one() };
    }
    let p = mask
        .clip_rect(b.x.as_f64(), b.y.as_f64(), b.w.as_f64(), b.h.as_f64())
        .map_or(0, |rect| mask.count_in(rect));
    theta_from_ratio(T::from_count(p) / b.area(), r)
}

/// `ratio / r` below `r`, 1 from there on.
pub fn theta_from_ratio<T: Scalar>(ratio: T, r: T) -> T {
    if ratio < r {
        ratio / r
    } else {
        T::one()
    }
}

/// Convex combination of the two stillness scores weighted by branch MVF1.
pub fn fuse_theta<T: Scalar>(theta_deep: T, theta_tra: T, mvf1_tra: T, mvf1_deep: T) -> T {
    let total = mvf1_tra + mvf1_deep;
    (mvf1_deep / total) * theta_deep + (mvf1_tra / total) * theta_tra
}

/// One fused observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedRecord<T> {
    pub frame: u32,
    pub track_id: u32,
    pub bbox: BoundingBox<T>,
    /// `None` when the deep verdict was unavailable.
    pub theta: Option<T>,
    pub label: MotionState,
    pub visibility: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionPath {
    Effective,
    Malfunction,
}

/// Fused record plus how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedDetail<T> {
    pub record: FusedRecord<T>,
    pub path: FusionPath,
    /// Index into the traditional records of the associated box.
    pub matched_tra: Option<usize>,
    pub theta_tra: T,
}

/// Fuses one frame. `verdicts[i]` belongs to `deep[i]`; `report.per_box[j]`
/// to `tra[j]`. Output is ordered by deep track id.
pub fn fuse_frame<T: Scalar>(
    deep: &[TrackRecord<T>],
    verdicts: &[MotionVerdict<T>],
    tra: &[TrackRecord<T>],
    mask: &ForegroundMask,
    report: &EffectivenessReport<T>,
    cfg: &FusionConfig<T>,
) -> Result<Vec<FusedDetail<T>>> {
    if deep.len() != verdicts.len() {
        return Err(Error::invalid("one verdict per deep record is required"));
    }
    if tra.len() != report.per_box.len() {
        return Err(Error::invalid("effectiveness report does not match traditional records"));
    }
    let mut order: Vec<usize> = (0..deep.len()).collect();
    order.sort_by_key(|&i| deep[i].track_id);
    let weights: Vec<Vec<T>> = order
        .iter()
        .map(|&i| tra.iter().map(|t| iou(&deep[i].bbox, &t.bbox)).collect())
        .collect();
    let mut matched = vec![None; deep.len()];
    for (row, col) in max_weight_matching(&weights, cfg.assoc_iou_gate) {
        matched[order[row]] = Some(col);
    }
    let box_w = compute_box_weights(cfg.mota_traditional(), cfg.mota_deep, cfg.alpha_b)
        .unwrap_or((T::one(), T::zero()));
    let mvf1_tra = cfg.mvf1_traditional();

    let mut out = Vec::with_capacity(deep.len());
    for &i in &order {
        let d = &deep[i];
        let m = matched[i];
        let broken_box = m.is_some_and(|j| report.per_box[j].verdict == Effectiveness::Ineffective);
        let path = if report.global == Effectiveness::Ineffective || broken_box {
            FusionPath::Malfunction
        } else {
            FusionPath::Effective
        };
        let bbox = match path {
            FusionPath::Effective => fuse_boxes(&d.bbox, m.map(|j| &tra[j].bbox), box_w),
            FusionPath::Malfunction => d.bbox,
        };
        let theta_tra = theta_traditional(&d.bbox, mask, path == FusionPath::Effective, m.is_some(), cfg.r);
        let v = &verdicts[i];
        let (theta, label) = if v.is_known() {
            let th = fuse_theta(v.theta, theta_tra, mvf1_tra, cfg.mvf1_deep);
            let label = if th > cfg.theta_threshold {
                MotionState::Static
            } else {
                MotionState::Moving
            };
            (Some(th), label)
        } else {
            (None, MotionState::Unknown)
        };
        out.push(FusedDetail {
            record: FusedRecord {
                frame: d.frame,
                track_id: d.track_id,
                bbox,
                theta,
                label,
                visibility: d.visibility,
            },
            path,
            matched_tra: m,
            theta_tra,
        });
    }
    Ok(out)
}
