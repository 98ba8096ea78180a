//! Numbered frame directories (`000001.png`, `000002.jpg`, ...).

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::image::GrayImage;

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

/// Image files of `dir` in ascending numeric order. Numbering must be
/// contiguous from the first index.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut frames: Vec<(u64, PathBuf)> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if !path.is_file() || !is_image(&path) {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        let index: u64 = stem
            .parse()
            .map_err(|_| Error::invalid(format!("frame file name `{}` is not a number", path.display())))?;
        frames.push((index, path));
    }
    if frames.is_empty() {
        return Err(Error::invalid(format!("no PNG or JPEG frames in {}", dir.display())));
    }
    frames.sort();
    for w in frames.windows(2) {
        let (a, b) = (w[0].0, w[1].0);
        if a == b {
            return Err(Error::invalid(format!("frame index {a} appears twice in {}", dir.display())));
        }
        if b != a + 1 {
            return Err(Error::MissingFrame {
                dir: dir.to_path_buf(),
                index: a + 1,
            });
        }
    }
    Ok(frames.into_iter().map(|(_, p)| p).collect())
}

pub fn read_image(path: &Path) -> Result<GrayImage> {
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    GrayImage::new(w, h, img.into_raw())
}

/// Decodes every frame to 8-bit luma; all frames must share one size.
pub fn read_image_sequence(dir: &Path) -> Result<Vec<GrayImage>> {
    let mut out: Vec<GrayImage> = Vec::new();
    for p in list_frames(dir)? {
        let img = read_image(&p)?;
        if let Some(first) = out.first() {
            if first.dims() != img.dims() {
                return Err(Error::DimensionMismatch {
                    expected: first.dims(),
                    actual: img.dims(),
                });
            }
        }
        out.push(img);
    }
    Ok(out)
}

/// Encodes a grayscale PNG.
pub fn write_png(path: &Path, img: &GrayImage) -> Result<()> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            source: e,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_gap_and_rgb() {
        let dir = tempfile::tempdir().unwrap();
        for i in [1, 2, 3, 10] {
            let img = GrayImage::filled(4, 3, i as u8);
            write_png(&dir.path().join(format!("{i:06}.png")), &img).unwrap();
        }
        let err = read_image_sequence(dir.path()).unwrap_err();
        assert!(matches!(err, Error::MissingFrame { index: 4, .. }), "{err}");
        for i in 4..10 {
            write_png(&dir.path().join(format!("{i:06}.png")), &GrayImage::filled(4, 3, i as u8)).unwrap();
        }
        std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let frames = read_image_sequence(dir.path()).unwrap();
        assert_eq!(frames.len(), 10);
        assert!(frames.iter().enumerate().all(|(k, f)| f.get(0, 0) == k as u8 + 1));

        let rgb_dir = tempfile::tempdir().unwrap();
        let rgb = image::RgbImage::from_pixel(5, 2, image::Rgb([255, 0, 0]));
        rgb.save(rgb_dir.path().join("1.png")).unwrap();
        let f = read_image_sequence(rgb_dir.path()).unwrap();
        assert_eq!(f[0].dims(), (5, 2));
        assert!((f[0].get(0, 0) as i32 - 54).abs() <= 1);
    }
}
