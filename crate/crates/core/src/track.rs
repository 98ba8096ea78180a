use std::fmt;

use crate::geometry::BoundingBox;
use crate::scalar::Scalar;

/// Which branch produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Source {
    Traditional,
    Deep,
    Fused,
}

/// Motion state of an object relative to the ground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum MotionState {
    Static,
    Moving,
    #[default]
    Unknown,
}

impl MotionState {
    /// File encoding: 0 static, 1 moving, -1 unknown.
    pub fn code(self) -> i32 {
        match self {
            MotionState::Static => 0,
            MotionState::Moving => 1,
            MotionState::Unknown => -1,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            0 => Some(MotionState::Static),
            1 => Some(MotionState::Moving),
            -1 => Some(MotionState::Unknown),
            _ => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != MotionState::Unknown
    }
}

impl fmt::Display for MotionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MotionState::Static => "static",
            MotionState::Moving => "moving",
            MotionState::Unknown => "unknown",
        })
    }
}

/// One observation of one identity in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackRecord<T> {
    /// 1-based frame index.
    pub frame: u32,
    pub track_id: u32,
    pub bbox: BoundingBox<T>,
    pub source: Source,
    /// MOT visibility column, carried through unchanged.
    pub visibility: Option<T>,
}

impl<T: Scalar> TrackRecord<T> {
    pub fn new(frame: u32, track_id: u32, bbox: BoundingBox<T>, source: Source) -> Self {
        Self {
            frame,
            track_id,
            bbox,
            source,
            visibility: None,
        }
    }
}

/// Groups records by frame (ascending), keeping input order within a frame.
pub fn group_by_frame<T: Clone>(records: &[TrackRecord<T>]) -> std::collections::BTreeMap<u32, Vec<TrackRecord<T>>> {
    let mut out: std::collections::BTreeMap<u32, Vec<TrackRecord<T>>> = Default::default();
    for r in records {
        out.entry(r.frame).or_default().push(r.clone());
    }
    out
}

/// Checks that no (frame, id) pair repeats.
pub fn check_unique_ids<T>(records: &[TrackRecord<T>]) -> Result<(), (u32, u32)> {
    let mut seen = std::collections::HashSet::new();
    for r in records {
        if !seen.insert((r.frame, r.track_id)) {
            return Err((r.frame, r.track_id));
        }
    }
    Ok(())
}

/// Ground-truth motion label for one object in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionAnnotation {
    pub frame: u32,
    pub track_id: u32,
    pub state: MotionState,
}
