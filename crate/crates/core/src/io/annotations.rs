//! Motion-label sidecar: `frame,id,motion` with motion 0 static, 1 moving,
//! -1 unknown.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::track::{MotionAnnotation, MotionState};

use super::{read_text, write_atomic};

/// Parses annotation rows, sorted by `(frame, id)`.
pub fn parse_annotations(text: &str, path: &Path) -> Result<Vec<MotionAnnotation>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = s.split(',').map(str::trim).collect();
        let [f, id, m] = cols.as_slice() else {
            return Err(err(line, format!("expected 3 columns, found {}", cols.len())));
        };
        let frame: u32 = f
            .parse()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| err(line, format!("invalid frame `{f}`")))?;
        let track_id: u32 = id
            .parse()
            .ok()
            .filter(|&v| v >= 1)
            .ok_or_else(|| err(line, format!("invalid id `{id}`")))?;
        let state = m
            .parse::<i64>()
            .ok()
            .and_then(MotionState::from_code)
            .ok_or_else(|| err(line, format!("invalid motion `{m}` (expected 0, 1 or -1)")))?;
        if !seen.insert((frame, track_id)) {
            return Err(err(line, format!("duplicate label for id {track_id} in frame {frame}")));
        }
        out.push(MotionAnnotation { frame, track_id, state });
    }
    out.sort_by_key(|a| (a.frame, a.track_id));
    Ok(out)
}

pub fn read_annotation_file(path: &Path) -> Result<Vec<MotionAnnotation>> {
    parse_annotations(&read_text(path)?, path)
}

pub fn format_annotations(annotations: &[MotionAnnotation]) -> String {
    let mut sorted = annotations.to_vec();
    sorted.sort_by_key(|a| (a.frame, a.track_id));
    let mut out = String::new();
    for a in sorted {
        let _ = writeln!(out, "{},{},{}", a.frame, a.track_id, a.state.code());
    }
    out
}

pub fn write_annotation_file(path: &Path, annotations: &[MotionAnnotation]) -> Result<()> {
    write_atomic(path, format_annotations(annotations).as_bytes())
}
