//! Synthetic scenes with exact ground truth: frames, tracks, motion labels and
//! foreground masks, plus the identity-deletion degradation used to vary
//! detection quality.

pub mod texture;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::{AffineTransform, BoundingBox, Point};
use crate::image::GrayImage;
use crate::io::kv::{Entry, KvDocument};
use crate::judge::displacement_pixels;
use crate::mask::ForegroundMask;
use crate::registration::WarpChain;
use crate::track::{MotionAnnotation, MotionState, Source, TrackRecord};
use texture::ValueNoise;

/// Where an actor is in ground (world) coordinates over time. Positions are
/// box top-left corners.
#[derive(Debug, Clone, PartialEq)]
pub enum MotionPath {
    Static { x: f64, y: f64 },
    Linear { x: f64, y: f64, vx: f64, vy: f64 },
    /// `(frame, x, y)` sorted by frame; held constant outside the span.
    Waypoints(Vec<(u32, f64, f64)>),
}

impl MotionPath {
    /// Top-left corner at 1-based `frame`; linear paths are anchored at frame 1.
    pub fn position(&self, frame: f64) -> Point<f64> {
        match self {
            MotionPath::Static { x, y } => Point::new(*x, *y),
            MotionPath::Linear { x, y, vx, vy } => {
                let dt = frame - 1.0;
                Point::new(x + vx * dt, y + vy * dt)
            }
            MotionPath::Waypoints(points) => {
                let first = points[0];
                if frame <= first.0 as f64 {
                    return Point::new(first.1, first.2);
                }
                for w in points.windows(2) {
                    let (a, b) = (w[0], w[1]);
                    if frame <= b.0 as f64 {
                        let s = (frame - a.0 as f64) / (b.0 as f64 - a.0 as f64);
                        return Point::new(a.1 + s * (b.1 - a.1), a.2 + s * (b.2 - a.2));
                    }
                }
                let last = points[points.len() - 1];
                Point::new(last.1, last.2)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actor {
    pub id: u32,
    /// First and last visible frame, 1-based inclusive.
    pub spawn: u32,
    pub despawn: u32,
    pub size: (f64, f64),
    pub path: MotionPath,
    pub intensity: u8,
}

/// Camera as a per-frame drift and rotation (about the frame center) relative
/// to frame 1.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CameraPath {
    /// Camera translation per frame, pixels; scene content moves the opposite way.
    pub drift: (f64, f64),
    pub rotation_deg_per_frame: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneScript {
    pub width: usize,
    pub height: usize,
    pub frames: u32,
    pub texture_seed: u64,
    pub texture_scale: f64,
    pub noise_sigma: f64,
    pub camera: CameraPath,
    /// Gap and bound used for the moving/static ground-truth rule.
    pub frame_gap: u32,
    /// `None` means 0.01 × the smaller frame side.
    pub beta_d: Option<f64>,
    pub actors: Vec<Actor>,
}

impl Default for SceneScript {
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            frames: 50,
            texture_seed: 1,
            texture_scale: 24.0,
            noise_sigma: 2.0,
            camera: CameraPath::default(),
            frame_gap: 3,
            beta_d: None,
            actors: Vec::new(),
        }
    }
}

/// Output of `render`.
#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub frames: Vec<GrayImage>,
    pub ground_truth: Vec<TrackRecord<f64>>,
    pub motion: Vec<MotionAnnotation>,
    /// True camera motion between consecutive frames.
    pub camera: WarpChain<f64>,
}

impl SceneScript {
    pub fn beta_d(&self) -> f64 {
        self.beta_d
            .unwrap_or(0.01 * self.width.min(self.height) as f64)
    }

    /// World → image map at 1-based `frame`.
    pub fn camera_transform(&self, frame: u32) -> AffineTransform<f64> {
        let k = frame as f64 - 1.0;
        let shift = AffineTransform::translation(-self.camera.drift.0 * k, -self.camera.drift.1 * k);
        let center = Point::new(self.width as f64 / 2.0, self.height as f64 / 2.0);
        let rot = AffineTransform::rotation_about(
            (self.camera.rotation_deg_per_frame * k).to_radians(),
            center,
        );
        rot.after(&shift)
    }

    /// Ground-frame box of `actor` at `frame`.
    pub fn world_box(&self, actor: &Actor, frame: f64) -> BoundingBox<f64> {
        let p = actor.path.position(frame);
        BoundingBox {
            x: p.x,
            y: p.y,
            w: actor.size.0,
            h: actor.size.1,
            confidence: None,
            class_id: None,
        }
    }

    /// Image-frame box of `actor` at `frame` (center mapped, extents kept).
    pub fn image_box(&self, actor: &Actor, frame: u32) -> BoundingBox<f64> {
        let wb = self.world_box(actor, frame as f64);
        wb.recentered(self.camera_transform(frame).apply(wb.center()))
    }

    /// Ground-truth motion state of `actor` at `frame`: moving iff its ground
    /// displacement over the gap exceeds β_d.
    pub fn motion_state(&self, actor: &Actor, frame: u32) -> MotionState {
        let old = self.world_box(actor, frame as f64 - self.frame_gap as f64);
        let new = self.world_box(actor, frame as f64);
        match displacement_pixels(&old, &new) {
            Ok(d) if d > self.beta_d() => MotionState::Moving,
            Ok(_) => MotionState::Static,
            Err(_) => MotionState::Unknown,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 1 || self.height < 1 || self.frames < 1 {
            return Err(Error::invalid("scene needs positive size and frame count"));
        }
        if !(self.texture_scale > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("texture_scale must be > 0 and noise_sigma >= 0"));
        }
        if self.frame_gap < 1 || self.beta_d.is_some_and(|b| !(b > 0.0)) {
            return Err(Error::invalid("frame_gap must be >= 1 and beta_d > 0"));
        }
        let mut ids = std::collections::HashSet::new();
        for a in &self.actors {
            if a.id == 0 || !ids.insert(a.id) {
                return Err(Error::invalid(format!("actor id {} is zero or repeated", a.id)));
            }
            if a.spawn < 1 || a.despawn > self.frames || a.spawn > a.despawn {
                return Err(Error::invalid(format!(
                    "actor {} lifetime {}..{} outside 1..{}",
                    a.id, a.spawn, a.despawn, self.frames
                )));
            }
            if !(a.size.0 > 0.0 && a.size.1 > 0.0) {
                return Err(Error::invalid(format!("actor {} has non-positive size", a.id)));
            }
            if let MotionPath::Waypoints(p) = &a.path {
                if p.is_empty() || p.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::invalid(format!(
                        "actor {} waypoints must be non-empty with increasing frames",
                        a.id
                    )));
                }
            }
            for f in a.spawn..=a.despawn {
                let b = self.image_box(a, f);
                if b.x < 0.0
                    || b.y < 0.0
                    || b.right() > self.width as f64
                    || b.bottom() > self.height as f64
                {
                    return Err(Error::invalid(format!(
                        "actor {} leaves the frame at frame {f}: ({:.2}, {:.2}, {}, {})",
                        a.id, b.x, b.y, b.w, b.h
                    )));
                }
            }
        }
        Ok(())
    }

    fn alive(&self, frame: u32) -> impl Iterator<Item = &Actor> {
        self.actors
            .iter()
            .filter(move |a| a.spawn <= frame && frame <= a.despawn)
    }

    /// Exact actor coverage at `frame`: a pixel is foreground when its center lies in an actor box.
    pub fn ground_truth_mask(&self, frame: u32) -> ForegroundMask {
        let boxes: Vec<_> = self.alive(frame).map(|a| self.image_box(a, frame)).collect();
        ForegroundMask::from_fn(self.width, self.height, |x, y| {
            let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
            boxes
                .iter()
                .any(|b| cx >= b.x && cx < b.right() && cy >= b.y && cy < b.bottom())
        })
    }

    /// Renders frame `frame` (1-based) deterministically from `seed`.
    pub fn render_frame(&self, frame: u32, seed: u64) -> GrayImage {
        let bg = ValueNoise::new(self.texture_seed, self.texture_scale);
        let to_world = self
            .camera_transform(frame)
            .inverse()
            .expect("camera transform is a rigid motion");
        let actors: Vec<(BoundingBox<f64>, &Actor, ValueNoise)> = self
            .alive(frame)
            .map(|a| {
                (
                    self.image_box(a, frame),
                    a,
                    ValueNoise::new(self.texture_seed ^ (a.id as u64).wrapping_mul(0x2545_F491), 6.0),
                )
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (frame as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let noise = Normal::new(0.0, self.noise_sigma.max(f64::MIN_POSITIVE)).expect("valid sigma");
        GrayImage::from_fn(self.width, self.height, |x, y| {
            let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut v = {
                let w = to_world.apply(Point::new(x as f64, y as f64));
                bg.sample(w.x, w.y)
            };
            for (b, a, tex) in actors.iter().rev() {
                if cx >= b.x && cx < b.right() && cy >= b.y && cy < b.bottom() {
                    let local = tex.sample(cx - b.x, cy - b.y) - 127.5;
                    v = a.intensity as f64 + 0.2 * local;
                    break;
                }
            }
            if self.noise_sigma > 0.0 {
                v += noise.sample(&mut rng);
            }
            v.round().clamp(0.0, 255.0) as u8
        })
    }

    /// Frames, ground-truth tracks, motion annotations and true camera motion.
    pub fn render(&self, seed: u64) -> Result<RenderedScene> {
        self.validate()?;
        let frames = (1..=self.frames).map(|f| self.render_frame(f, seed)).collect();
        let mut ground_truth = Vec::new();
        let mut motion = Vec::new();
        for f in 1..=self.frames {
            let mut alive: Vec<&Actor> = self.alive(f).collect();
            alive.sort_by_key(|a| a.id);
            for a in alive {
                let mut rec = TrackRecord::new(f, a.id, self.image_box(a, f), Source::Deep);
                rec.bbox.confidence = Some(1.0);
                rec.bbox.class_id = Some(1);
                rec.visibility = Some(1.0);
                ground_truth.push(rec);
                motion.push(MotionAnnotation {
                    frame: f,
                    track_id: a.id,
                    state: self.motion_state(a, f),
                });
            }
        }
        let camera = WarpChain::from_steps(
            (2..=self.frames)
                .map(|f| {
                    self.camera_transform(f)
                        .after(&self.camera_transform(f - 1).inverse().expect("rigid"))
                })
                .collect(),
        );
        Ok(RenderedScene {
            frames,
            ground_truth,
            motion,
            camera,
        })
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let doc = KvDocument::parse(text, path)?;
        let mut s = SceneScript::default();
        for e in &doc.top().entries {
            match e.key.as_str() {
                "width" => s.width = doc.value(e)?,
                "height" => s.height = doc.value(e)?,
                "frames" => s.frames = doc.value(e)?,
                "texture_seed" => s.texture_seed = doc.value(e)?,
                "texture_scale" => s.texture_scale = doc.value(e)?,
                "noise_sigma" => s.noise_sigma = doc.value(e)?,
                "camera_drift" => s.camera.drift = doc.pair(e)?,
                "camera_rotation" => s.camera.rotation_deg_per_frame = doc.value(e)?,
                "frame_gap" => s.frame_gap = doc.value(e)?,
                "beta_d" => s.beta_d = Some(doc.value(e)?),
                other => return Err(doc.error(e.line, format!("unknown scene key `{other}`"))),
            }
        }
        for sec in doc.sections.iter().skip(1) {
            if sec.name != "actor" {
                return Err(doc.error(sec.line, format!("unknown section `[{}]`", sec.name)));
            }
            s.actors.push(parse_actor(&doc, &sec.entries, s.actors.len() as u32 + 1, s.frames, sec.line)?);
        }
        s.validate().map_err(|e| doc.error(0, e.to_string()))?;
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "width = {}", self.width);
        let _ = writeln!(out, "height = {}", self.height);
        let _ = writeln!(out, "frames = {}", self.frames);
        let _ = writeln!(out, "texture_seed = {}", self.texture_seed);
        let _ = writeln!(out, "texture_scale = {}", self.texture_scale);
        let _ = writeln!(out, "noise_sigma = {}", self.noise_sigma);
        let _ = writeln!(out, "camera_drift = {}, {}", self.camera.drift.0, self.camera.drift.1);
        let _ = writeln!(out, "camera_rotation = {}", self.camera.rotation_deg_per_frame);
        let _ = writeln!(out, "frame_gap = {}", self.frame_gap);
        if let Some(b) = self.beta_d {
            let _ = writeln!(out, "beta_d = {b}");
        }
        for a in &self.actors {
            let _ = writeln!(out, "\n[actor]");
            let _ = writeln!(out, "id = {}", a.id);
            let _ = writeln!(out, "spawn = {}", a.spawn);
            let _ = writeln!(out, "despawn = {}", a.despawn);
            let _ = writeln!(out, "size = {}, {}", a.size.0, a.size.1);
            let _ = writeln!(out, "intensity = {}", a.intensity);
            match &a.path {
                MotionPath::Static { x, y } => {
                    let _ = writeln!(out, "position = {x}, {y}");
                }
                MotionPath::Linear { x, y, vx, vy } => {
                    let _ = writeln!(out, "position = {x}, {y}");
                    let _ = writeln!(out, "velocity = {vx}, {vy}");
                }
                MotionPath::Waypoints(p) => {
                    let items: Vec<String> = p.iter().map(|(f, x, y)| format!("{f}:{x}:{y}")).collect();
                    let _ = writeln!(out, "waypoints = {}", items.join("; "));
                }
            }
        }
        out
    }
}

fn parse_actor(doc: &KvDocument, entries: &[Entry], default_id: u32, frames: u32, line: usize) -> Result<Actor> {
    let mut id = default_id;
    let (mut spawn, mut despawn) = (1, frames);
    let mut size = None;
    let mut position = None;
    let mut velocity = None;
    let mut waypoints = None;
    let mut intensity = 220u8;
    for e in entries {
        match e.key.as_str() {
            "id" => id = doc.value(e)?,
            "spawn" => spawn = doc.value(e)?,
            "despawn" => despawn = doc.value(e)?,
            "size" => size = Some(doc.pair(e)?),
            "position" => position = Some(doc.pair(e)?),
            "velocity" => velocity = Some(doc.pair(e)?),
            "intensity" => intensity = doc.value(e)?,
            "waypoints" => {
                let mut pts = Vec::new();
                for item in e.value.split(';') {
                    let parts: Vec<&str> = item.trim().split(':').collect();
                    let bad = || doc.error(e.line, format!("waypoint `{}` is not frame:x:y", item.trim()));
                    let [f, x, y] = parts.as_slice() else {
                        return Err(bad());
                    };
                    pts.push((
                        f.trim().parse().map_err(|_| bad())?,
                        x.trim().parse().map_err(|_| bad())?,
                        y.trim().parse().map_err(|_| bad())?,
                    ));
                }
                waypoints = Some(pts);
            }
            other => return Err(doc.error(e.line, format!("unknown actor key `{other}`"))),
        }
    }
    let size = size.ok_or_else(|| doc.error(line, "actor needs `size`"))?;
    let path = match (waypoints, position, velocity) {
        (Some(p), None, None) => MotionPath::Waypoints(p),
        (None, Some((x, y)), None) => MotionPath::Static { x, y },
        (None, Some((x, y)), Some((vx, vy))) => MotionPath::Linear { x, y, vx, vy },
        _ => {
            return Err(doc.error(
                line,
                "actor needs either `waypoints` or `position` (optionally with `velocity`)",
            ))
        }
    };
    Ok(Actor {
        id,
        spawn,
        despawn,
        size,
        path,
        intensity,
    })
}

/// Removes whole identities (`round(drop_fraction × #ids)` of them, chosen by
/// seeded shuffle) and perturbs every remaining box coordinate uniformly in
/// `[-jitter, jitter]` (extents kept ≥ 1 px).
pub fn degrade_tracks(
    gt: &[TrackRecord<f64>],
    drop_fraction: f64,
    jitter: f64,
    seed: u64,
) -> Result<Vec<TrackRecord<f64>>> {
    if !(0.0..=1.0).contains(&drop_fraction) {
        return Err(Error::invalid(format!("drop fraction {drop_fraction} outside [0, 1]")));
    }
    if !(jitter >= 0.0) {
        return Err(Error::invalid("jitter must be >= 0"));
    }
    let mut ids: Vec<u32> = gt.iter().map(|r| r.track_id).collect();
    ids.sort_unstable();
    ids.dedup();
    let n_drop = (drop_fraction * ids.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let dropped: std::collections::HashSet<u32> = ids[..n_drop].iter().copied().collect();
    let mut out = Vec::with_capacity(gt.len());
    for r in gt.iter().filter(|r| !dropped.contains(&r.track_id)) {
        let mut r = r.clone();
        if jitter > 0.0 {
            let mut j = || rng.gen_range(-jitter..=jitter);
            r.bbox.x += j();
            r.bbox.y += j();
            r.bbox.w = (r.bbox.w + j()).max(1.0);
            r.bbox.h = (r.bbox.h + j()).max(1.0);
        }
        out.push(r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn actor(id: u32, path: MotionPath) -> Actor {
        Actor {
            id,
            spawn: 1,
            despawn: 50,
            size: (20.0, 20.0),
            path,
            intensity: 230,
        }
    }

    fn scene(actors: Vec<Actor>) -> SceneScript {
        SceneScript {
            width: 160,
            height: 120,
            frames: 50,
            actors,
            ..Default::default()
        }
    }

    #[test]
    fn static_actor_annotated_static() {
        let s = scene(vec![actor(1, MotionPath::Static { x: 50.0, y: 40.0 })]);
        let r = s.render(7).unwrap();
        assert_eq!(r.motion.len(), 50);
        assert!(r.motion.iter().all(|m| m.state == MotionState::Static));
    }

    #[test]
    fn fast_actor_annotated_moving() {
        let mut s = scene(vec![actor(
            1,
            MotionPath::Linear {
                x: 5.0,
                y: 40.0,
                vx: 2.5,
                vy: 0.0,
            },
        )]);
        s.beta_d = Some(5.0);
        // 3 frames * 2.5 px = 7.5 > 5
        let r = s.render(7).unwrap();
        assert!(r.motion.iter().all(|m| m.state == MotionState::Moving));
    }

    #[test]
    fn camera_drift_does_not_make_static_actor_move() {
        let mut s = scene(vec![actor(1, MotionPath::Static { x: 120.0, y: 60.0 })]);
        s.camera.drift = (2.0, 0.0);
        let r = s.render(1).unwrap();
        assert!(r.motion.iter().all(|m| m.state == MotionState::Static));
        // but it does move in the image
        assert_eq!(r.ground_truth[0].bbox.x - r.ground_truth[1].bbox.x, 2.0);
        let step = r.camera.steps()[0];
        assert!((step.translation_part().x + 2.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_frame_actor_rejected() {
        let s = scene(vec![actor(
            1,
            MotionPath::Linear {
                x: 100.0,
                y: 40.0,
                vx: 3.0,
                vy: 0.0,
            },
        )]);
        assert!(s.render(0).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = scene(vec![actor(1, MotionPath::Static { x: 50.0, y: 40.0 })]);
        assert_eq!(s.render_frame(3, 9), s.render_frame(3, 9));
        assert_ne!(s.render_frame(3, 9), s.render_frame(3, 10));
    }

    #[test]
    fn waypoints_interpolate_and_clamp() {
        let p = MotionPath::Waypoints(vec![(5, 0.0, 0.0), (15, 10.0, 20.0)]);
        assert_eq!(p.position(1.0), Point::new(0.0, 0.0));
        assert_eq!(p.position(10.0), Point::new(5.0, 10.0));
        assert_eq!(p.position(99.0), Point::new(10.0, 20.0));
    }

    #[test]
    fn script_text_round_trip() {
        let mut s = scene(vec![
            actor(3, MotionPath::Static { x: 50.0, y: 40.0 }),
            actor(
                4,
                MotionPath::Linear {
                    x: 10.0,
                    y: 10.0,
                    vx: 0.5,
                    vy: 0.25,
                },
            ),
            actor(5, MotionPath::Waypoints(vec![(1, 20.0, 20.0), (30, 60.0, 70.5)])),
        ]);
        s.camera.drift = (0.5, -0.25);
        s.beta_d = Some(2.5);
        let text = s.to_text();
        assert_eq!(SceneScript::parse(&text, Path::new("s")).unwrap(), s);
    }

    #[test]
    fn script_errors_name_lines() {
        let err = SceneScript::parse("width = 10\nbogus = 1\n", Path::new("s")).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
        let err = SceneScript::parse("frames = 5\n[actor]\nposition = 1, 1\n", Path::new("s")).unwrap_err();
        assert!(err.to_string().contains("size"), "{err}");
    }

    fn gt_with_ids(n: u32) -> Vec<TrackRecord<f64>> {
        (1..=3)
            .flat_map(|f| {
                (1..=n).map(move |id| {
                    TrackRecord::new(f, id, BoundingBox::new(id as f64 * 10.0, 5.0, 8.0, 8.0).unwrap(), Source::Deep)
                })
            })
            .collect()
    }

    #[test]
    fn degrade_examples() {
        let gt = gt_with_ids(10);
        assert_eq!(degrade_tracks(&gt, 0.0, 0.0, 1).unwrap(), gt);
        assert!(degrade_tracks(&gt, 1.0, 0.0, 1).unwrap().is_empty());
        let half = degrade_tracks(&gt, 0.5, 0.0, 1).unwrap();
        let ids: std::collections::BTreeSet<u32> = half.iter().map(|r| r.track_id).collect();
        assert_eq!(ids.len(), 5);
        assert_eq!(half.len(), 15);
        assert_eq!(half, degrade_tracks(&gt, 0.5, 0.0, 1).unwrap());
        let jittered = degrade_tracks(&gt, 0.0, 0.5, 2).unwrap();
        assert!(jittered
            .iter()
            .zip(&gt)
            .all(|(a, b)| (a.bbox.x - b.bbox.x).abs() <= 0.5 && (a.bbox.w - b.bbox.w).abs() <= 0.5));
        assert!(degrade_tracks(&gt, 1.5, 0.0, 1).is_err());
    }
}
