//! `mod2t`: command-line front end for the motion-state tracking toolkit.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mod2t_core::bgmodel::{extract_blobs, BackgroundModel};
use mod2t_core::io::{
    format_annotations, format_fused, format_tracks, list_frames, parse_fused, read_annotation_file,
    read_image_sequence, read_track_file, write_atomic, write_png, RunConfig,
};
use mod2t_core::judge::{Judge, MotionVerdict};
use mod2t_core::metrics::{evaluate, BfMode, LabeledSequence};
use mod2t_core::pipeline::{estimate_warps, judge_tracks, run_pipeline, run_traditional};
use mod2t_core::synth::{degrade_tracks, SceneScript};
use mod2t_core::{Error, GrayImage, MotionAnnotation, MotionState, Source, Track};

#[derive(Parser, Debug)]
#[command(name = "mod2t", version, about = "Motion-state aware multi-object tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Background subtraction: per-frame foreground masks (PGM) and blob boxes.
    Bgsub {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frames: PathBuf,
        /// Output directory (created; must not exist or be empty).
        #[arg(long)]
        out: PathBuf,
    },
    /// Traditional branch: blob tracks over a frame sequence.
    TrackTra {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Motion-state verdict for every deep-branch observation.
    Judge {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        deep_tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full flow: both branches, effectiveness gate, judgment and fusion.
    Fuse {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        deep_tracks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scores predictions against ground truth and motion labels.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Fused output (11 columns) or a plain track file.
        #[arg(long)]
        pred: PathBuf,
        /// Motion labels for a plain track file given as --pred.
        #[arg(long)]
        pred_motion: Option<PathBuf>,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        motion_gt: PathBuf,
        /// `adaptive` or a fixed balance factor in [0, 1].
        #[arg(long, default_value = "adaptive")]
        bf: String,
        /// Report file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Renders a scene script into frames, ground truth and motion labels.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        script: PathBuf,
        /// Output directory (created; must not exist or be empty).
        #[arg(long)]
        out: PathBuf,
    },
    /// MVF1 under whole-identity deletion, one CSV row per deletion fraction.
    BfTrend {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        motion_gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.4,0.6")]
        fractions: Vec<f64>,
        /// Flip the predicted label when (frame + id) is a multiple of this; 0 never flips.
        #[arg(long, default_value_t = 10)]
        flip_every: u32,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Traditional-branch MOTA on similar data, or `none`.
    #[arg(long)]
    prior_mota: Option<String>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Validation(String),
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
            Failure::Validation(_) => 4,
            Failure::Internal(_) => 5,
        }
    }

    fn render(&self) -> String {
        let (kind, msg) = match self {
            Failure::Usage(m) => ("usage", m),
            Failure::Io(m) => ("io", m),
            Failure::Validation(m) => ("validation", m),
            Failure::Internal(m) => ("internal", m),
        };
        let msg: String = msg
            .replace('\\', "\\\\")
            .replace('"', "\\\"")
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        format!("error kind={kind} msg=\"{msg}\"")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Io(e.to_string())
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOD2T_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or("").trim_start_matches("error: ").to_string();
            return fail(Failure::Usage(first));
        }
    };
    std::panic::set_hook(Box::new(|info| log::debug!("{info}")));
    let outcome = std::panic::catch_unwind(|| run(cli)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unexpected panic".into());
        Err(Failure::Internal(msg))
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> ExitCode {
    eprintln!("{}", f.render());
    ExitCode::from(f.code())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Bgsub { common, frames, out } => bgsub(&common, &frames, &out),
        Command::TrackTra { common, frames, out } => track_tra(&common, &frames, &out),
        Command::Judge {
            common,
            frames,
            deep_tracks,
            out,
        } => judge(&common, &frames, &deep_tracks, &out),
        Command::Fuse {
            common,
            frames,
            deep_tracks,
            out,
        } => fuse(&common, &frames, &deep_tracks, &out),
        Command::Eval {
            common,
            pred,
            pred_motion,
            gt,
            motion_gt,
            bf,
            out,
        } => eval(&common, &pred, pred_motion.as_deref(), &gt, &motion_gt, &bf, out.as_deref()),
        Command::Synth { common, script, out } => synth(&common, &script, &out),
        Command::BfTrend {
            common,
            gt,
            motion_gt,
            out,
            fractions,
            flip_every,
        } => bf_trend(&common, &gt, &motion_gt, &out, &fractions, flip_every),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &common.prior_mota {
        cfg.fusion.prior_mota = if p == "none" {
            None
        } else {
            Some(
                p.parse::<f64>()
                    .map_err(|_| Failure::Usage(format!("--prior-mota expects a number or `none`, got `{p}`")))?,
            )
        };
        cfg.validate()?;
    }
    Ok(cfg)
}

fn load_frames(dir: &Path) -> Result<Vec<GrayImage>, Failure> {
    let frames = read_image_sequence(dir)?;
    if frames.is_empty() {
        return Err(Failure::Validation(format!("no frames in {}", dir.display())));
    }
    log::info!("loaded {} frames from {}", frames.len(), dir.display());
    Ok(frames)
}

/// Output directory that must be absent or empty.
fn check_out_dir(out: &Path) -> Outcome {
    if out.exists() {
        let empty = std::fs::read_dir(out)
            .map_err(|e| Failure::Io(format!("{}: {e}", out.display())))?
            .next()
            .is_none();
        if !empty {
            return Err(Failure::Validation(format!("output directory {} is not empty", out.display())));
        }
    }
    Ok(())
}

/// Fills a fresh directory next to `out` and renames it into place.
fn publish_dir(out: &Path, fill: impl FnOnce(&Path) -> Result<(), Failure>) -> Outcome {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error, p: &Path| Failure::Io(format!("{}: {e}", p.display()));
    let staging = tempfile::Builder::new()
        .prefix(".mod2t-")
        .tempdir_in(parent)
        .map_err(|e| io(e, parent))?;
    fill(staging.path())?;
    if out.exists() {
        std::fs::remove_dir(out).map_err(|e| io(e, out))?;
    }
    let staged = staging.keep();
    std::fs::rename(&staged, out).map_err(|e| {
        let _ = std::fs::remove_dir_all(&staged);
        io(e, out)
    })
}

fn bgsub(common: &Common, frames_dir: &Path, out: &Path) -> Outcome {
    let cfg = load_config(common)?;
    check_out_dir(out)?;
    let frames = load_frames(frames_dir)?;
    let warps = estimate_warps(&frames, &cfg.registration)?;
    let (w, h) = frames[0].dims();
    let mut model = BackgroundModel::new(w, h, cfg.bg.clone())?;
    let mut masks = Vec::with_capacity(frames.len());
    let mut blobs = Vec::new();
    for (k, frame) in frames.iter().enumerate() {
        let warp = if k == 0 {
            mod2t_core::Affine::identity()
        } else {
            warps.steps()[k - 1]
        };
        let mask = model.step(frame, &warp)?;
        for (i, b) in extract_blobs(&mask, &cfg.bg).into_iter().enumerate() {
            blobs.push(Track::new(k as u32 + 1, i as u32 + 1, b, Source::Traditional));
        }
        masks.push(mask);
    }
    publish_dir(out, |dir| {
        let masks_dir = dir.join("masks");
        std::fs::create_dir(&masks_dir).map_err(|e| Failure::Io(format!("{}: {e}", masks_dir.display())))?;
        for (k, m) in masks.iter().enumerate() {
            m.write_pgm(&masks_dir.join(format!("{:06}.pgm", k + 1)))?;
        }
        write_atomic(&dir.join("blobs.txt"), format_tracks(&blobs).as_bytes())?;
        Ok(())
    })
}

fn track_tra(common: &Common, frames_dir: &Path, out: &Path) -> Outcome {
    let cfg = load_config(common)?;
    let frames = load_frames(frames_dir)?;
    let warps = estimate_warps(&frames, &cfg.registration)?;
    let tra = run_traditional(&frames, &warps, &cfg)?;
    write_atomic(out, format_tracks(&tra.tracks).as_bytes())?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-1".into(), |v| format!("{v:.6}"))
}

/// `frame,id,theta,a_a,a_m,label`; unavailable values are -1.
fn format_verdicts(tracks: &[Track], verdicts: &[MotionVerdict<f64>]) -> String {
    let mut rows: Vec<(&Track, &MotionVerdict<f64>)> = tracks.iter().zip(verdicts).collect();
    rows.sort_by_key(|(t, _)| (t.frame, t.track_id));
    let mut s = String::new();
    for (t, v) in rows {
        let known = v.is_known();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            t.frame,
            t.track_id,
            opt(known.then_some(v.theta)),
            opt(v.a_a.filter(|_| known)),
            opt(known.then_some(v.a_m)),
            v.label.code()
        );
    }
    s
}

fn judge(common: &Common, frames_dir: &Path, deep_path: &Path, out: &Path) -> Outcome {
    let cfg = load_config(common)?;
    let deep = read_track_file(deep_path, Source::Deep)?;
    let frames = load_frames(frames_dir)?;
    let (w, h) = frames[0].dims();
    let judge = Judge::new(cfg.judge.clone(), w, h)?;
    let warps = estimate_warps(&frames, &cfg.registration)?;
    let verdicts = judge_tracks(&frames, &deep, &warps, &judge)?;
    write_atomic(out, format_verdicts(&deep, &verdicts).as_bytes())?;
    Ok(())
}

fn fuse(common: &Common, frames_dir: &Path, deep_path: &Path, out: &Path) -> Outcome {
    let cfg = load_config(common)?;
    let deep = read_track_file(deep_path, Source::Deep)?;
    let frames = load_frames(frames_dir)?;
    let result = run_pipeline(&frames, &deep, &cfg)?;
    if !result.malfunction_frames.is_empty() {
        log::info!(
            "traditional branch judged ineffective in {} frame(s)",
            result.malfunction_frames.len()
        );
    }
    write_atomic(out, format_fused(&result.fused()).as_bytes())?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn first_row_columns(text: &str) -> usize {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .map_or(0, |l| l.split(',').count())
}

fn eval(
    common: &Common,
    pred_path: &Path,
    pred_motion: Option<&Path>,
    gt_path: &Path,
    motion_gt: &Path,
    bf: &str,
    out: Option<&Path>,
) -> Outcome {
    let cfg = load_config(common)?;
    let bf_mode = match bf {
        "adaptive" => BfMode::Adaptive,
        v => match v.parse::<f64>() {
            Ok(x) if (0.0..=1.0).contains(&x) => BfMode::Fixed(x),
            _ => return Err(Failure::Usage(format!("--bf expects `adaptive` or a number in [0, 1], got `{v}`"))),
        },
    };
    let text = read_text(pred_path)?;
    let pred = if first_row_columns(&text) == 11 {
        if pred_motion.is_some() {
            return Err(Failure::Usage("--pred-motion applies to plain track files only".into()));
        }
        LabeledSequence::from_fused(&parse_fused(&text, pred_path)?)
    } else {
        let tracks = mod2t_core::io::parse_tracks(&text, pred_path, Source::Deep)?;
        let labels = match pred_motion {
            Some(p) => read_annotation_file(p)?,
            None => Vec::new(),
        };
        LabeledSequence::from_annotated(&tracks, &labels)?
    };
    let gt_tracks = read_track_file(gt_path, Source::Deep)?;
    let labels = read_annotation_file(motion_gt)?;
    let gt = LabeledSequence::from_annotated(&gt_tracks, &labels)?;
    let report = evaluate(&pred, &gt, cfg.eval_iou, bf_mode);
    let text = report.to_kv();
    match out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn synth(common: &Common, script_path: &Path, out: &Path) -> Outcome {
    let script = SceneScript::parse(&read_text(script_path)?, script_path)?;
    check_out_dir(out)?;
    let scene = script.render(common.seed)?;
    publish_dir(out, |dir| {
        let frames_dir = dir.join("frames");
        std::fs::create_dir(&frames_dir).map_err(|e| Failure::Io(format!("{}: {e}", frames_dir.display())))?;
        for (k, f) in scene.frames.iter().enumerate() {
            write_png(&frames_dir.join(format!("{:06}.png", k + 1)), f)?;
        }
        write_atomic(&dir.join("gt.txt"), format_tracks(&scene.ground_truth).as_bytes())?;
        write_atomic(&dir.join("motion.txt"), format_annotations(&scene.motion).as_bytes())?;
        Ok(())
    })?;
    // sanity check: the directory reads back as a complete sequence
    let listed = list_frames(&out.join("frames"))?;
    if listed.len() != scene.frames.len() {
        return Err(Failure::Internal("written frame count does not match the scene".into()));
    }
    Ok(())
}

fn flip(state: MotionState) -> MotionState {
    match state {
        MotionState::Moving => MotionState::Static,
        MotionState::Static => MotionState::Moving,
        s => s,
    }
}

fn bf_trend(common: &Common, gt_path: &Path, motion_gt: &Path, out: &Path, fractions: &[f64], flip_every: u32) -> Outcome {
    let cfg = load_config(common)?;
    if fractions.is_empty() {
        return Err(Failure::Usage("--fractions needs at least one value".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Failure::Validation(format!("deletion fraction {f} outside [0, 1]")));
    }
    let gt_tracks = read_track_file(gt_path, Source::Deep)?;
    let annotations = read_annotation_file(motion_gt)?;
    let gt = LabeledSequence::from_annotated(&gt_tracks, &annotations)?;
    let labels: HashMap<(u32, u32), MotionState> = annotations
        .iter()
        .map(|a| {
            let flipped = flip_every > 0 && (a.frame + a.track_id) % flip_every == 0;
            ((a.frame, a.track_id), if flipped { flip(a.state) } else { a.state })
        })
        .collect();
    let mut csv = String::from("fraction,mota,precision,recall,bf,mvf1_adaptive,mvf1_bf0,mvf1_bf1\n");
    for &fraction in fractions {
        let kept = degrade_tracks(&gt_tracks, fraction, 0.0, common.seed)?;
        let pred_labels: Vec<MotionAnnotation> = kept
            .iter()
            .filter_map(|r| {
                labels.get(&(r.frame, r.track_id)).map(|&state| MotionAnnotation {
                    frame: r.frame,
                    track_id: r.track_id,
                    state,
                })
            })
            .collect();
        let pred = LabeledSequence::from_annotated(&kept, &pred_labels)?;
        let adaptive = evaluate(&pred, &gt, cfg.eval_iou, BfMode::Adaptive);
        let bf0 = evaluate(&pred, &gt, cfg.eval_iou, BfMode::Fixed(0.0));
        let bf1 = evaluate(&pred, &gt, cfg.eval_iou, BfMode::Fixed(1.0));
        let _ = writeln!(
            csv,
            "{fraction},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            adaptive.mota.map_or_else(|| "nan".into(), |m| format!("{m:.6}")),
            adaptive.precision,
            adaptive.recall,
            adaptive.bf,
            adaptive.mvf1,
            bf0.mvf1,
            bf1.mvf1
        );
    }
    write_atomic(out, csv.as_bytes())?;
    Ok(())
}
