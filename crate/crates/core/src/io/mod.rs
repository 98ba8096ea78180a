//! File formats: MOT-style track files, motion-label sidecars, run
//! configuration, image sequences.

pub mod annotations;
pub mod config;
pub mod images;
pub mod kv;
pub mod tracks;

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use annotations::{format_annotations, parse_annotations, read_annotation_file, write_annotation_file};
pub use config::RunConfig;
pub use images::{list_frames, read_image_sequence, write_png};
pub use tracks::{
    format_fused, format_tracks, parse_fused, parse_tracks, read_fused_output, read_track_file, write_fused_output,
    write_track_file,
};

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}
