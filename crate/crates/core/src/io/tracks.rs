//! MOT-Challenge style track rows:
//! `frame,id,x,y,w,h,conf,class,visibility` with `-1` for absent values.
//! Fused output appends `theta,label` (label 0 static, 1 moving, -1 unknown).
//!
//! Floats are written with six decimals, so a record round-trips exactly when
//! its values lie on that grid.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fuse::FusedRecord;
use crate::geometry::BoundingBox;
use crate::track::{MotionState, Source, TrackRecord};

use super::{read_text, write_atomic};

struct Row {
    record: TrackRecord<f64>,
    extra: Vec<String>,
}

fn parse_rows(text: &str, path: &Path, source: Source, max_cols: usize) -> Result<Vec<(usize, Row)>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = s.split(',').map(str::trim).collect();
        if cols.len() < 6 || cols.len() > max_cols {
            return Err(err(line, format!("expected 6 to {max_cols} columns, found {}", cols.len())));
        }
        let num = |k: usize, name: &str| -> Result<f64> {
            cols[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line, format!("invalid {name} `{}`", cols[k])))
        };
        let int = |k: usize, name: &str| -> Result<i64> {
            let v = num(k, name)?;
            if v.fract() != 0.0 {
                return Err(err(line, format!("{name} `{}` is not an integer", cols[k])));
            }
            Ok(v as i64)
        };
        let optional = |k: usize, name: &str| -> Result<Option<f64>> {
            if k >= cols.len() {
                return Ok(None);
            }
            let v = num(k, name)?;
            Ok((v != -1.0).then_some(v))
        };
        let frame = int(0, "frame")?;
        let id = int(1, "id")?;
        if frame < 1 || frame > u32::MAX as i64 {
            return Err(err(line, format!("frame {frame} must be >= 1")));
        }
        if id < 1 || id > u32::MAX as i64 {
            return Err(err(line, format!("track id {id} must be >= 1")));
        }
        let mut bbox = BoundingBox::new(num(2, "x")?, num(3, "y")?, num(4, "w")?, num(5, "h")?)
            .map_err(|e| err(line, e.to_string()))?;
        if let Some(c) = optional(6, "confidence")? {
            if !(0.0..=1.0).contains(&c) {
                return Err(err(line, format!("confidence {c} outside [0, 1]")));
            }
            bbox.confidence = Some(c);
        }
        if cols.len() > 7 {
            let c = int(7, "class")?;
            if c != -1 {
                bbox.class_id = Some(i32::try_from(c).map_err(|_| err(line, format!("class {c} out of range")))?);
            }
        }
        let visibility = optional(8, "visibility")?;
        if visibility.is_some_and(|v| v < 0.0) {
            return Err(err(line, "visibility must be >= 0".into()));
        }
        if !seen.insert((frame, id)) {
            return Err(err(line, format!("duplicate id {id} in frame {frame}")));
        }
        let mut record = TrackRecord::new(frame as u32, id as u32, bbox, source);
        record.visibility = visibility;
        rows.push((
            line,
            Row {
                record,
                extra: cols[cols.len().min(9)..].iter().map(|s| s.to_string()).collect(),
            },
        ));
    }
    rows.sort_by_key(|(_, r)| (r.record.frame, r.record.track_id));
    Ok(rows)
}

/// Parses track rows (6 to 10 columns; a tenth column is ignored), sorted by
/// `(frame, id)`.
pub fn parse_tracks(text: &str, path: &Path, source: Source) -> Result<Vec<TrackRecord<f64>>> {
    Ok(parse_rows(text, path, source, 10)?
        .into_iter()
        .map(|(_, r)| r.record)
        .collect())
}

pub fn read_track_file(path: &Path, source: Source) -> Result<Vec<TrackRecord<f64>>> {
    parse_tracks(&read_text(path)?, path, source)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-1".to_string(), |v| format!("{v:.6}"))
}

fn base_row(out: &mut String, frame: u32, id: u32, b: &BoundingBox<f64>, visibility: Option<f64>) {
    let _ = write!(
        out,
        "{frame},{id},{:.6},{:.6},{:.6},{:.6},{},{},{}",
        b.x,
        b.y,
        b.w,
        b.h,
        opt(b.confidence),
        b.class_id.map_or_else(|| "-1".to_string(), |c| c.to_string()),
        opt(visibility)
    );
}

/// Renders records sorted by `(frame, id)`.
pub fn format_tracks(records: &[TrackRecord<f64>]) -> String {
    let mut sorted: Vec<&TrackRecord<f64>> = records.iter().collect();
    sorted.sort_by_key(|r| (r.frame, r.track_id));
    let mut out = String::new();
    for r in sorted {
        base_row(&mut out, r.frame, r.track_id, &r.bbox, r.visibility);
        out.push('\n');
    }
    out
}

pub fn write_track_file(path: &Path, records: &[TrackRecord<f64>]) -> Result<()> {
    write_atomic(path, format_tracks(records).as_bytes())
}

/// Renders fused records sorted by `(frame, id)`; an unavailable Θ is `-1`.
pub fn format_fused(records: &[FusedRecord<f64>]) -> String {
    let mut sorted: Vec<&FusedRecord<f64>> = records.iter().collect();
    sorted.sort_by_key(|r| (r.frame, r.track_id));
    let mut out = String::new();
    for r in sorted {
        base_row(&mut out, r.frame, r.track_id, &r.bbox, r.visibility);
        let _ = writeln!(out, ",{},{}", opt(r.theta), r.label.code());
    }
    out
}

pub fn write_fused_output(path: &Path, records: &[FusedRecord<f64>]) -> Result<()> {
    write_atomic(path, format_fused(records).as_bytes())
}

/// Parses fused rows (exactly 11 columns).
pub fn parse_fused(text: &str, path: &Path) -> Result<Vec<FusedRecord<f64>>> {
    let err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut out = Vec::new();
    for (line, row) in parse_rows(text, path, Source::Fused, 11)? {
        let [theta, label] = row.extra.as_slice() else {
            return Err(err(line, "fused rows need 11 columns".into()));
        };
        let theta: f64 = theta
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(line, format!("invalid theta `{theta}`")))?;
        let theta = (theta != -1.0).then_some(theta);
        if theta.is_some_and(|t| !(0.0..=1.0).contains(&t)) {
            return Err(err(line, "theta outside [0, 1]".into()));
        }
        let label = label
            .parse::<i64>()
            .ok()
            .and_then(MotionState::from_code)
            .ok_or_else(|| err(line, format!("invalid motion label `{label}`")))?;
        if theta.is_none() != (label == MotionState::Unknown) {
            return Err(err(line, "theta must be -1 exactly when the label is -1".into()));
        }
        let r = row.record;
        out.push(FusedRecord {
            frame: r.frame,
            track_id: r.track_id,
            bbox: r.bbox,
            theta,
            label,
            visibility: r.visibility,
        });
    }
    Ok(out)
}

pub fn read_fused_output(path: &Path) -> Result<Vec<FusedRecord<f64>>> {
    parse_fused(&read_text(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("t.txt")
    }

    #[test]
    fn parse_examples() {
        let r = parse_tracks("1,1,10,20,30,40,0.9,1,1", p(), Source::Deep).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!((r[0].frame, r[0].track_id), (1, 1));
        assert_eq!((r[0].bbox.x, r[0].bbox.y, r[0].bbox.w, r[0].bbox.h), (10.0, 20.0, 30.0, 40.0));
        assert_eq!(r[0].bbox.confidence, Some(0.9));
        assert_eq!(r[0].bbox.class_id, Some(1));
        assert_eq!(r[0].visibility, Some(1.0));
        assert!(parse_tracks("", p(), Source::Deep).unwrap().is_empty());
        let e = parse_tracks("1,1,0,0,5,5\n2,1,10,20,0,40,1,1,1\n", p(), Source::Deep).unwrap_err();
        assert!(e.to_string().contains("t.txt:2:"), "{e}");
    }

    #[test]
    fn rejects_bad_rows() {
        for bad in ["1,1,0,0,5", "0,1,0,0,5,5", "1,0,0,0,5,5", "1,1,0,0,5,5,2", "1,1,a,0,5,5", "1,1,0,0,5,5\n1,1,3,3,5,5"] {
            assert!(parse_tracks(bad, p(), Source::Deep).is_err(), "{bad}");
        }
    }

    #[test]
    fn sorted_and_six_column_rows() {
        let r = parse_tracks("2,1,0,0,5,5\n1,3,0,0,5,5\n1,2,0,0,5,5,-1,-1,-1,-1\n", p(), Source::Deep).unwrap();
        let keys: Vec<_> = r.iter().map(|r| (r.frame, r.track_id)).collect();
        assert_eq!(keys, vec![(1, 2), (1, 3), (2, 1)]);
        assert_eq!(format_tracks(&r).lines().next().unwrap(), "1,2,0.000000,0.000000,5.000000,5.000000,-1,-1,-1");
    }

    #[test]
    fn fused_row_format() {
        let rec = FusedRecord {
            frame: 1,
            track_id: 2,
            bbox: BoundingBox::new(1.0, 2.0, 3.0, 4.0).unwrap(),
            theta: Some(0.75),
            label: MotionState::Moving,
            visibility: None,
        };
        let text = format_fused(&[rec.clone()]);
        assert_eq!(text, "1,2,1.000000,2.000000,3.000000,4.000000,-1,-1,-1,0.750000,1\n");
        assert_eq!(parse_fused(&text, p()).unwrap(), vec![rec]);
        assert_eq!(format_fused(&[]), "");
        assert!(parse_fused("1,2,1,2,3,4,-1,-1,-1,0.5,-1", p()).is_err());
    }
}
