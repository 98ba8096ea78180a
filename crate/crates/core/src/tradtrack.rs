//! Blob tracker for the background-subtraction branch: constant-velocity
//! prediction, IoU association by optimal assignment, tentative/confirmed/lost
//! life cycle.

use crate::assignment::max_weight_matching;
use crate::error::{Error, Result};
use crate::geometry::{iou, AffineTransform, BoundingBox, Point};
use crate::registration::stabilize_box;
use crate::scalar::Scalar;
use crate::track::{Source, TrackRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig<T> {
    /// Minimum IoU between a prediction and a blob to associate them.
    pub iou_gate: T,
    /// Frames a confirmed track may coast without a blob before it is retired.
    pub max_age: u32,
    /// Matched frames required before a track is reported.
    pub min_hits: u32,
    /// Position and velocity gains of the alpha-beta filter.
    pub alpha: T,
    pub beta: T,
}

impl<T: Scalar> Default for TrackerConfig<T> {
    fn default() -> Self {
        Self {
            iou_gate: T::lit(0.3),
            max_age: 30,
            min_hits: 3,
            alpha: T::lit(0.75),
            beta: T::lit(0.3),
        }
    }
}

impl<T: Scalar> TrackerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let (z, o) = (T::zero(), T::one());
        if !(self.iou_gate > z && self.iou_gate < o) {
            return Err(Error::Config(format!("tracker iou_gate {} outside (0, 1)", self.iou_gate)));
        }
        if self.max_age < 1 || self.min_hits < 1 {
            return Err(Error::Config("tracker max_age and min_hits must be >= 1".into()));
        }
        if !(self.alpha > z && self.alpha <= o && self.beta >= z && self.beta <= o) {
            return Err(Error::Config("tracker gains must satisfy 0 < alpha <= 1, 0 <= beta <= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    /// Confirmed but coasting on prediction.
    Lost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackState<T> {
    pub track_id: u32,
    pub bbox: BoundingBox<T>,
    /// Center velocity in pixels per frame.
    pub velocity: (T, T),
    pub hits: u32,
    pub age_since_update: u32,
    pub status: TrackStatus,
}

impl<T: Scalar> TrackState<T> {
    fn predicted(&self) -> BoundingBox<T> {
        self.bbox.translated(self.velocity.0, self.velocity.1)
    }
}

#[derive(Debug, Clone)]
pub struct Tracker<T> {
    cfg: TrackerConfig<T>,
    /// Always sorted by `track_id`.
    tracks: Vec<TrackState<T>>,
    next_id: u32,
    frame: u32,
}

impl<T: Scalar> Tracker<T> {
    pub fn new(cfg: TrackerConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            tracks: Vec::new(),
            next_id: 1,
            frame: 0,
        })
    }

    pub fn config(&self) -> &TrackerConfig<T> {
        &self.cfg
    }

    pub fn tracks(&self) -> &[TrackState<T>] {
        &self.tracks
    }

    /// Frames processed so far.
    pub fn frame(&self) -> u32 {
        self.frame
    }

    /// Moves every track into the next frame's coordinates given the camera
    /// motion `warp` (previous → current). Call before `step`.
    pub fn compensate(&mut self, warp: &AffineTransform<T>) {
        let m = warp.m;
        for t in &mut self.tracks {
            t.bbox = stabilize_box(&t.bbox, warp);
            let (vx, vy) = t.velocity;
            t.velocity = (m[0] * vx + m[1] * vy, m[3] * vx + m[4] * vy);
        }
    }

    /// Consumes one frame's blobs and returns the confirmed tracks observed in it.
    pub fn step(&mut self, blobs: &[BoundingBox<T>]) -> Vec<TrackRecord<T>> {
        self.frame += 1;
        let predicted: Vec<BoundingBox<T>> = self.tracks.iter().map(TrackState::predicted).collect();
        let weights: Vec<Vec<T>> = predicted
            .iter()
            .map(|p| blobs.iter().map(|b| iou(p, b)).collect())
            .collect();
        let matches = max_weight_matching(&weights, self.cfg.iou_gate);

        let mut blob_used = vec![false; blobs.len()];
        let mut track_matched = vec![false; self.tracks.len()];
        for &(ti, bi) in &matches {
            blob_used[bi] = true;
            track_matched[ti] = true;
            let (alpha, beta) = (self.cfg.alpha, self.cfg.beta);
            let min_hits = self.cfg.min_hits;
            let t = &mut self.tracks[ti];
            let pred = predicted[ti];
            let obs = blobs[bi];
            let (pc, oc) = (pred.center(), obs.center());
            let (rx, ry) = (oc.x - pc.x, oc.y - pc.y);
            if t.hits == 1 {
                let prev = t.bbox.center();
                t.velocity = (oc.x - prev.x, oc.y - prev.y);
                t.bbox = obs;
            } else {
                t.velocity = (t.velocity.0 + beta * rx, t.velocity.1 + beta * ry);
                let c = Point::new(pc.x + alpha * rx, pc.y + alpha * ry);
                t.bbox = obs.recentered(c);
            }
            t.bbox.confidence = obs.confidence;
            t.bbox.class_id = obs.class_id;
            t.hits += 1;
            t.age_since_update = 0;
            if t.hits >= min_hits {
                t.status = TrackStatus::Confirmed;
            }
        }
        for (ti, t) in self.tracks.iter_mut().enumerate() {
            if !track_matched[ti] {
                t.bbox = predicted[ti];
                t.age_since_update += 1;
                if t.status == TrackStatus::Confirmed {
                    t.status = TrackStatus::Lost;
                }
            }
        }
        let max_age = self.cfg.max_age;
        self.tracks.retain(|t| match t.status {
            TrackStatus::Tentative => t.age_since_update == 0,
            _ => t.age_since_update <= max_age,
        });
        for (bi, b) in blobs.iter().enumerate() {
            if blob_used[bi] {
                continue;
            }
            let status = if self.cfg.min_hits <= 1 {
                TrackStatus::Confirmed
            } else {
                TrackStatus::Tentative
            };
            self.tracks.push(TrackState {
                track_id: self.next_id,
                bbox: *b,
                velocity: (T::zero(), T::zero()),
                hits: 1,
                age_since_update: 0,
                status,
            });
            self.next_id += 1;
        }
        self.tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && t.age_since_update == 0)
            .map(|t| TrackRecord::new(self.frame, t.track_id, t.bbox, Source::Traditional))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    fn b(x: f64, y: f64) -> BoundingBox<f64> {
        BoundingBox::new(x, y, 20.0, 20.0).unwrap()
    }

    #[test]
    fn no_blobs_no_output() {
        let mut t = Tracker::<f64>::new(TrackerConfig::default()).unwrap();
        for _ in 0..10 {
            assert!(t.step(&[]).is_empty());
        }
    }

    #[test]
    fn single_moving_blob_keeps_its_id() {
        let mut t = Tracker::<f64>::new(TrackerConfig::default()).unwrap();
        let mut ids = BTreeSet::new();
        for f in 0..10 {
            let out = t.step(&[b(10.0 + 2.0 * f as f64, 30.0)]);
            if f < 2 {
                assert!(out.is_empty());
            } else {
                assert_eq!(out.len(), 1);
                ids.insert(out[0].track_id);
                assert!((out[0].bbox.x - (10.0 + 2.0 * f as f64)).abs() < 1.0);
            }
        }
        assert_eq!(ids.len(), 1);
    }

    #[test]
    fn crossing_blobs_keep_identities() {
        let mut t = Tracker::<f64>::new(TrackerConfig::default()).unwrap();
        // object 1 moves right, object 2 moves left; they overlap around frame 15
        let mut assoc: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for f in 0..30 {
            let x1 = 10.0 + 3.0 * f as f64;
            let x2 = 100.0 - 3.0 * f as f64;
            let blobs = [b(x1, 40.0), b(x2, 46.0)];
            for r in t.step(&blobs) {
                let gt = if (r.bbox.y - 40.0).abs() < (r.bbox.y - 46.0).abs() { 1 } else { 2 };
                assoc.entry(gt).or_default().insert(r.track_id);
            }
        }
        assert_eq!(assoc[&1].len(), 1);
        assert_eq!(assoc[&2].len(), 1);
        assert_ne!(assoc[&1], assoc[&2]);
    }

    #[test]
    fn coasting_then_retire() {
        let cfg = TrackerConfig {
            max_age: 2,
            ..Default::default()
        };
        let mut t = Tracker::<f64>::new(cfg).unwrap();
        for _ in 0..4 {
            t.step(&[b(10.0, 10.0)]);
        }
        assert_eq!(t.tracks().len(), 1);
        t.step(&[]);
        t.step(&[]);
        assert_eq!(t.tracks()[0].status, TrackStatus::Lost);
        let out = t.step(&[b(10.0, 10.0)]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].track_id, 1);
        for _ in 0..3 {
            t.step(&[]);
        }
        assert!(t.tracks().is_empty());
    }

    #[test]
    fn compensation_follows_camera() {
        let mut t = Tracker::<f64>::new(TrackerConfig::default()).unwrap();
        // static object, camera pans so the object drifts by -4 px per frame
        let mut ids = BTreeSet::new();
        for f in 0..12 {
            if f > 0 {
                t.compensate(&AffineTransform::translation(-4.0, 0.0));
            }
            for r in t.step(&[b(100.0 - 4.0 * f as f64, 30.0)]) {
                ids.insert(r.track_id);
            }
        }
        assert_eq!(ids.len(), 1);
        assert!(t.tracks()[0].velocity.0.abs() < 0.5);
    }

    #[test]
    fn one_to_one_assignment() {
        let mut t = Tracker::<f64>::new(TrackerConfig {
            min_hits: 1,
            ..Default::default()
        })
        .unwrap();
        let out = t.step(&[b(10.0, 10.0), b(12.0, 10.0)]);
        assert_eq!(out.len(), 2);
        let out = t.step(&[b(11.0, 10.0)]);
        assert_eq!(out.len(), 1);
        assert_eq!(t.tracks().len(), 2);
    }
}
