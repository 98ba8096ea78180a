//! End-to-end flow: camera motion, traditional branch, judgment of the deep
//! tracks, effectiveness gate and fusion.

use std::collections::{BTreeMap, HashMap};

use crate::bgmodel::{extract_blobs, BackgroundModel};
use crate::error::{Error, Result};
use crate::fuse::{assess_effectiveness, fuse_frame, Effectiveness, FusedDetail, FusedRecord};
use crate::geometry::{AffineTransform, BoundingBox};
use crate::image::GrayImage;
use crate::io::RunConfig;
use crate::judge::{Judge, MotionVerdict, PatchCache};
use crate::mask::ForegroundMask;
use crate::registration::{estimate_camera_motion, stabilize_box, RegistrationConfig, WarpChain};
use crate::track::{check_unique_ids, TrackRecord};
use crate::tradtrack::Tracker;

/// Runs `f` over `0..n` on all available cores, keeping index order.
fn parallel_map<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(workers);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| s.spawn(move || (w * chunk..((w + 1) * chunk).min(n)).map(f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn check_frames(frames: &[GrayImage]) -> Result<()> {
    let Some(first) = frames.first() else {
        return Err(Error::invalid("no frames"));
    };
    for f in frames {
        if f.dims() != first.dims() {
            return Err(Error::DimensionMismatch {
                expected: first.dims(),
                actual: f.dims(),
            });
        }
    }
    Ok(())
}

/// Camera motion between every pair of consecutive frames.
pub fn estimate_warps(frames: &[GrayImage], cfg: &RegistrationConfig) -> Result<WarpChain<f64>> {
    check_frames(frames)?;
    let steps = parallel_map(frames.len().saturating_sub(1), |k| {
        estimate_camera_motion::<f64>(&frames[k], &frames[k + 1], cfg)
    });
    let mut chain = WarpChain::new();
    for (k, s) in steps.into_iter().enumerate() {
        let reg = s?;
        if !reg.converged {
            log::debug!("registration {}->{} stopped at the iteration cap", k + 1, k + 2);
        }
        chain.push(reg.transform);
    }
    Ok(chain)
}

/// Output of the background-subtraction branch.
#[derive(Debug, Clone)]
pub struct TraditionalOutput {
    pub masks: Vec<ForegroundMask>,
    pub blobs: Vec<Vec<BoundingBox<f64>>>,
    pub tracks: Vec<TrackRecord<f64>>,
}

pub fn run_traditional(frames: &[GrayImage], warps: &WarpChain<f64>, cfg: &RunConfig) -> Result<TraditionalOutput> {
    check_frames(frames)?;
    if warps.steps().len() + 1 != frames.len() {
        return Err(Error::invalid("one camera motion per consecutive frame pair is required"));
    }
    let (w, h) = frames[0].dims();
    let mut model = BackgroundModel::new(w, h, cfg.bg.clone())?;
    let mut tracker = Tracker::new(cfg.tracker.clone())?;
    let mut out = TraditionalOutput {
        masks: Vec::with_capacity(frames.len()),
        blobs: Vec::with_capacity(frames.len()),
        tracks: Vec::new(),
    };
    for (k, frame) in frames.iter().enumerate() {
        let warp = if k == 0 {
            AffineTransform::identity()
        } else {
            warps.steps()[k - 1]
        };
        let mask = model.step(frame, &warp)?;
        let blobs = extract_blobs(&mask, &cfg.bg);
        if k > 0 {
            tracker.compensate(&warp);
        }
        out.tracks.extend(tracker.step(&blobs));
        out.masks.push(mask);
        out.blobs.push(blobs);
    }
    Ok(out)
}

fn check_tracks(tracks: &[TrackRecord<f64>], n_frames: usize) -> Result<()> {
    if let Err((f, id)) = check_unique_ids(tracks) {
        return Err(Error::invalid(format!("track id {id} repeats in frame {f}")));
    }
    if let Some(r) = tracks.iter().find(|r| r.frame as usize > n_frames) {
        return Err(Error::invalid(format!(
            "track {} refers to frame {} but only {n_frames} frames exist",
            r.track_id, r.frame
        )));
    }
    Ok(())
}

/// Verdict for every deep record, in input order.
pub fn judge_tracks(
    frames: &[GrayImage],
    tracks: &[TrackRecord<f64>],
    warps: &WarpChain<f64>,
    judge: &Judge<f64>,
) -> Result<Vec<MotionVerdict<f64>>> {
    check_frames(frames)?;
    check_tracks(tracks, frames.len())?;
    let gap = judge.config().frame_gap as u32;
    let index: HashMap<(u32, u32), usize> = tracks
        .iter()
        .enumerate()
        .map(|(i, r)| ((r.frame, r.track_id), i))
        .collect();
    let mut by_frame: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, r) in tracks.iter().enumerate() {
        by_frame.entry(r.frame).or_default().push(i);
    }
    let mut verdicts = vec![MotionVerdict::unknown(); tracks.len()];
    let mut cache = PatchCache::new();
    for (&frame, members) in &by_frame {
        cache.evict_before(frame.saturating_sub(gap));
        if frame <= gap {
            continue;
        }
        let old_frame = frame - gap;
        let Some(warp) = warps.between(old_frame as usize - 1, frame as usize - 1) else {
            return Err(Error::invalid("camera motion chain is shorter than the frame sequence"));
        };
        for &i in members {
            let new = &tracks[i];
            let Some(&j) = index.get(&(old_frame, new.track_id)) else {
                continue;
            };
            let old = &tracks[j];
            let stabilized = stabilize_box(&old.bbox, &warp);
            let old_patch = cache
                .get_or_insert(judge, old.track_id, old_frame, &frames[old_frame as usize - 1], &old.bbox)
                .clone();
            let new_patch = cache.get_or_insert(judge, new.track_id, frame, &frames[frame as usize - 1], &new.bbox);
            verdicts[i] = judge.verdict(&stabilized, &new.bbox, &old_patch, new_patch)?;
        }
    }
    Ok(verdicts)
}

/// Everything the full flow produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub warps: WarpChain<f64>,
    pub traditional: TraditionalOutput,
    /// Parallel to the deep records passed in.
    pub verdicts: Vec<MotionVerdict<f64>>,
    pub details: Vec<FusedDetail<f64>>,
    /// Frames whose traditional branch was judged ineffective as a whole.
    pub malfunction_frames: Vec<u32>,
}

impl PipelineOutput {
    pub fn fused(&self) -> Vec<FusedRecord<f64>> {
        self.details.iter().map(|d| d.record.clone()).collect()
    }
}

/// Fuses already computed branches frame by frame.
pub fn fuse_all(
    deep: &[TrackRecord<f64>],
    verdicts: &[MotionVerdict<f64>],
    traditional: &TraditionalOutput,
    cfg: &RunConfig,
) -> Result<(Vec<FusedDetail<f64>>, Vec<u32>)> {
    if deep.len() != verdicts.len() {
        return Err(Error::invalid("one verdict per deep record is required"));
    }
    let mut deep_by_frame: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, r) in deep.iter().enumerate() {
        deep_by_frame.entry(r.frame).or_default().push(i);
    }
    let mut tra_by_frame: HashMap<u32, Vec<TrackRecord<f64>>> = HashMap::new();
    for r in &traditional.tracks {
        tra_by_frame.entry(r.frame).or_default().push(r.clone());
    }
    let empty = Vec::new();
    let mut details = Vec::with_capacity(deep.len());
    let mut malfunction = Vec::new();
    for (&frame, idx) in &deep_by_frame {
        let mask = traditional
            .masks
            .get(frame as usize - 1)
            .ok_or_else(|| Error::invalid(format!("no foreground mask for frame {frame}")))?;
        let tra = tra_by_frame.get(&frame).unwrap_or(&empty);
        let boxes: Vec<_> = tra.iter().map(|r| r.bbox).collect();
        let report = assess_effectiveness(mask, &boxes, &cfg.fusion);
        if report.global == Effectiveness::Ineffective {
            malfunction.push(frame);
        }
        let d: Vec<_> = idx.iter().map(|&i| deep[i].clone()).collect();
        let v: Vec<_> = idx.iter().map(|&i| verdicts[i]).collect();
        details.extend(fuse_frame(&d, &v, tra, mask, &report, &cfg.fusion)?);
    }
    Ok((details, malfunction))
}

/// Full flow on a frame sequence and the deep branch's tracks.
pub fn run_pipeline(frames: &[GrayImage], deep: &[TrackRecord<f64>], cfg: &RunConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    check_frames(frames)?;
    check_tracks(deep, frames.len())?;
    let (w, h) = frames[0].dims();
    let judge = Judge::new(cfg.judge.clone(), w, h)?;
    let warps = estimate_warps(frames, &cfg.registration)?;
    let traditional = run_traditional(frames, &warps, cfg)?;
    let verdicts = judge_tracks(frames, deep, &warps, &judge)?;
    let (details, malfunction_frames) = fuse_all(deep, &verdicts, &traditional, cfg)?;
    Ok(PipelineOutput {
        warps,
        traditional,
        verdicts,
        details,
        malfunction_frames,
    })
}
