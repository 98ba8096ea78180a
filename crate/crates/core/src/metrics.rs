//! Motion-state validation metrics (MVP, MVR, MVF1 with a balance factor),
//! CLEAR-MOT MOTA and detection precision/recall.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::assignment::max_weight_matching;
use crate::error::{Error, Result};
use crate::fuse::FusedRecord;
use crate::geometry::{iou, BoundingBox};
use crate::scalar::Scalar;
use crate::track::{MotionAnnotation, MotionState, TrackRecord};

/// One labeled object in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBox<T> {
    pub track_id: u32,
    pub bbox: BoundingBox<T>,
    pub state: MotionState,
}

/// Per-frame ground truth (or predictions) with motion labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSequence<T> {
    pub frames: BTreeMap<u32, Vec<LabeledBox<T>>>,
}

pub type MotionGroundTruth<T> = LabeledSequence<T>;

impl<T: Scalar> LabeledSequence<T> {
    /// Joins track rows with their motion labels; rows without a label are
    /// `Unknown`. A label for an object missing from the tracks is an error.
    pub fn from_annotated(records: &[TrackRecord<T>], annotations: &[MotionAnnotation]) -> Result<Self> {
        let mut labels: HashMap<(u32, u32), MotionState> = HashMap::with_capacity(annotations.len());
        for a in annotations {
            if labels.insert((a.frame, a.track_id), a.state).is_some() {
                return Err(Error::invalid(format!(
                    "duplicate motion label for frame {} id {}",
                    a.frame, a.track_id
                )));
            }
        }
        let mut seq = Self::default();
        for r in records {
            let state = labels.remove(&(r.frame, r.track_id)).unwrap_or_default();
            seq.frames.entry(r.frame).or_default().push(LabeledBox {
                track_id: r.track_id,
                bbox: r.bbox,
                state,
            });
        }
        if let Some(((f, id), _)) = labels.into_iter().min_by_key(|(k, _)| *k) {
            return Err(Error::invalid(format!(
                "motion label for frame {f} id {id} has no ground-truth box"
            )));
        }
        Ok(seq)
    }

    /// Unlabeled tracks (every state `Unknown`).
    pub fn from_tracks(records: &[TrackRecord<T>]) -> Self {
        Self::from_annotated(records, &[]).expect("no annotations to conflict")
    }

    pub fn from_fused(records: &[FusedRecord<T>]) -> Self {
        let mut seq = Self::default();
        for r in records {
            seq.frames.entry(r.frame).or_default().push(LabeledBox {
                track_id: r.track_id,
                bbox: r.bbox,
                state: r.label,
            });
        }
        seq
    }

    pub fn len(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Optimal one-to-one matching of predictions to ground truth by IoU, keeping
/// pairs with IoU at least `iou_thresh`. Returns `(pred, gt)` index pairs.
pub fn match_frame<T: Scalar>(pred: &[BoundingBox<T>], gt: &[BoundingBox<T>], iou_thresh: T) -> Vec<(usize, usize)> {
    let w: Vec<Vec<T>> = pred.iter().map(|p| gt.iter().map(|g| iou(p, g)).collect()).collect();
    max_weight_matching(&w, iou_thresh)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BfMode<T> {
    /// Half the sum of detection precision and recall.
    Adaptive,
    Fixed(T),
}

/// Raised when a ratio had a zero denominator and was reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MetricFlags {
    /// No matched prediction carried a comparable motion label.
    pub no_labeled_matches: bool,
    pub no_predictions: bool,
    pub no_ground_truth: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport<T> {
    pub mvtp: usize,
    pub mvfp: usize,
    pub mvfn: usize,
    pub mvp: T,
    pub mvr: T,
    pub mvf1: T,
    pub bf: T,
    pub precision: T,
    pub recall: T,
    /// `None` when there is no ground truth.
    pub mota: Option<T>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub idsw: usize,
    pub gt_total: usize,
    pub flags: MetricFlags,
}

/// `(MVP, MVR, MVF1)`; zero denominators give 0.
pub fn mvf1_from_counts<T: Scalar>(mvtp: usize, mvfp: usize, mvfn: usize, bf: T) -> (T, T, T) {
    let z = T::zero();
    let tp = T::from_count(mvtp);
    let p_den = tp + T::from_count(mvfp);
    let mvp = if p_den > z { tp / p_den } else { z };
    let r_den = tp + bf * T::from_count(mvfn);
    let mvr = if r_den > z { tp / r_den } else { z };
    let mvf1 = if mvp + mvr > z {
        T::lit(2.0) * mvp * mvr / (mvp + mvr)
    } else {
        z
    };
    (mvp, mvr, mvf1)
}

/// `1 - (FN + FP + IDSW) / GT`.
pub fn mota_from_counts<T: Scalar>(fn_: usize, fp: usize, idsw: usize, gt: usize) -> Result<T> {
    if gt == 0 {
        return Err(Error::Degenerate("MOTA is undefined without ground truth".into()));
    }
    Ok(T::one() - T::from_count(fn_ + fp + idsw) / T::from_count(gt))
}

/// `(precision, recall)`; zero denominators give 0.
pub fn detection_pr<T: Scalar>(tp: usize, fp: usize, fn_: usize) -> (T, T) {
    let ratio = |a: usize, b: usize| {
        if a + b == 0 {
            T::zero()
        } else {
            T::from_count(a) / T::from_count(a + b)
        }
    };
    (ratio(tp, fp), ratio(tp, fn_))
}

pub fn balance_factor<T: Scalar>(precision: T, recall: T) -> T {
    (precision + recall) / T::lit(2.0)
}

/// Matches every frame and aggregates all metrics.
///
/// MVTP/MVFP count matched pairs where both labels are known; MVFN counts
/// ground-truth objects with a known label that no prediction matched.
/// Identity switches follow CLEAR-MOT: a matched ground-truth object whose
/// prediction id differs from the one it was last matched to.
pub fn evaluate<T: Scalar>(
    pred: &LabeledSequence<T>,
    gt: &MotionGroundTruth<T>,
    iou_thresh: T,
    bf_mode: BfMode<T>,
) -> MetricReport<T> {
    let frames: BTreeSet<u32> = pred.frames.keys().chain(gt.frames.keys()).copied().collect();
    let empty = Vec::new();
    let (mut tp, mut fp, mut fn_, mut idsw, mut gt_total) = (0, 0, 0, 0, 0);
    let (mut mvtp, mut mvfp, mut mvfn) = (0, 0, 0);
    let mut last_match: HashMap<u32, u32> = HashMap::new();
    for f in frames {
        let p = pred.frames.get(&f).unwrap_or(&empty);
        let g = gt.frames.get(&f).unwrap_or(&empty);
        let pb: Vec<_> = p.iter().map(|x| x.bbox).collect();
        let gb: Vec<_> = g.iter().map(|x| x.bbox).collect();
        let pairs = match_frame(&pb, &gb, iou_thresh);
        let mut gt_hit = vec![false; g.len()];
        for &(pi, gi) in &pairs {
            gt_hit[gi] = true;
            let (pp, gg) = (&p[pi], &g[gi]);
            if let Some(prev) = last_match.insert(gg.track_id, pp.track_id) {
                if prev != pp.track_id {
                    idsw += 1;
                }
            }
            if pp.state.is_known() && gg.state.is_known() {
                if pp.state == gg.state {
                    mvtp += 1;
                } else {
                    mvfp += 1;
                }
            }
        }
        mvfn += g.iter().zip(&gt_hit).filter(|(x, hit)| !**hit && x.state.is_known()).count();
        tp += pairs.len();
        fp += p.len() - pairs.len();
        fn_ += g.len() - pairs.len();
        gt_total += g.len();
    }
    let (precision, recall) = detection_pr::<T>(tp, fp, fn_);
    let bf = match bf_mode {
        BfMode::Adaptive => balance_factor(precision, recall),
        BfMode::Fixed(v) => v,
    };
    let (mvp, mvr, mvf1) = mvf1_from_counts(mvtp, mvfp, mvfn, bf);
    MetricReport {
        mvtp,
        mvfp,
        mvfn,
        mvp,
        mvr,
        mvf1,
        bf,
        precision,
        recall,
        mota: mota_from_counts(fn_, fp, idsw, gt_total).ok(),
        tp,
        fp,
        fn_,
        idsw,
        gt_total,
        flags: MetricFlags {
            no_labeled_matches: mvtp + mvfp == 0,
            no_predictions: tp + fp == 0,
            no_ground_truth: gt_total == 0,
        },
    }
}

impl<T: Scalar> MetricReport<T> {
    /// Line-oriented `key=value` rendering.
    pub fn to_kv(&self) -> String {
        let f = |v: T| format!("{:.6}", v.as_f64());
        let mota = self.mota.map_or_else(|| "nan".to_string(), f);
        let mut lines = vec![
            format!("mvf1={}", f(self.mvf1)),
            format!("mvp={}", f(self.mvp)),
            format!("mvr={}", f(self.mvr)),
            format!("bf={}", f(self.bf)),
            format!("mvtp={}", self.mvtp),
            format!("mvfp={}", self.mvfp),
            format!("mvfn={}", self.mvfn),
            format!("mota={mota}"),
            format!("precision={}", f(self.precision)),
            format!("recall={}", f(self.recall)),
            format!("tp={}", self.tp),
            format!("fp={}", self.fp),
            format!("fn={}", self.fn_),
            format!("idsw={}", self.idsw),
            format!("gt={}", self.gt_total),
        ];
        let mut flags = Vec::new();
        if self.flags.no_labeled_matches {
            flags.push("no_labeled_matches");
        }
        if self.flags.no_predictions {
            flags.push("no_predictions");
        }
        if self.flags.no_ground_truth {
            flags.push("no_ground_truth");
        }
        lines.push(format!("flags={}", flags.join(",")));
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

impl<T: Scalar> fmt::Display for MetricReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "MVF1 {:.4}  (MVP {:.4}, MVR {:.4}, BF {:.4})",
            self.mvf1.as_f64(),
            self.mvp.as_f64(),
            self.mvr.as_f64(),
            self.bf.as_f64()
        )?;
        writeln!(f, "  MVTP {}  MVFP {}  MVFN {}", self.mvtp, self.mvfp, self.mvfn)?;
        match self.mota {
            Some(m) => writeln!(f, "MOTA {:.4}", m.as_f64())?,
            None => writeln!(f, "MOTA undefined (no ground truth)")?,
        }
        writeln!(
            f,
            "  TP {}  FP {}  FN {}  IDSW {}  GT {}",
            self.tp, self.fp, self.fn_, self.idsw, self.gt_total
        )?;
        write!(
            f,
            "Detection precision {:.4}  recall {:.4}",
            self.precision.as_f64(),
            self.recall.as_f64()
        )
    }
}
