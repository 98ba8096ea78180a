use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn mod2t(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mod2t"))
        .args(args)
        .env("MOD2T_LOG", "off")
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr_line(o: &Output) -> String {
    let s = String::from_utf8_lossy(&o.stderr).to_string();
    assert_eq!(s.lines().count(), 1, "expected one stderr line, got {s:?}");
    s.trim_end().to_string()
}

const SCENE: &str = "\
width = 160
height = 120
frames = 24

[actor]
size = 16, 16
position = 20, 20
intensity = 240

[actor]
size = 16, 16
position = 10, 70
velocity = 3, 0
intensity = 15
";

const STATIC_SCENE: &str = "\
width = 160
height = 120
frames = 16

[actor]
size = 18, 18
position = 30, 30
intensity = 240

[actor]
size = 20, 16
position = 100, 60
intensity = 10
";

fn synth(dir: &TempDir, script: &str, seed: &str) -> PathBuf {
    let script_path = dir.path().join("scene.txt");
    std::fs::write(&script_path, script).unwrap();
    let out = dir.path().join("scene");
    let o = mod2t(&["synth", "--script", p(&script_path), "--out", p(&out), "--seed", seed]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn kv(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .to_string()
}

#[test]
fn synth_writes_frames_and_truth() {
    let dir = TempDir::new().unwrap();
    let scene = synth(&dir, SCENE, "3");
    let frames = std::fs::read_dir(scene.join("frames")).unwrap().count();
    assert_eq!(frames, 24);
    let gt = std::fs::read_to_string(scene.join("gt.txt")).unwrap();
    assert_eq!(gt.lines().count(), 48);
    let motion = std::fs::read_to_string(scene.join("motion.txt")).unwrap();
    assert!(motion.lines().all(|l| l.split(',').count() == 3));
}

#[test]
fn eval_on_ground_truth_is_perfect() {
    let dir = TempDir::new().unwrap();
    let scene = synth(&dir, SCENE, "1");
    let (gt, motion) = (scene.join("gt.txt"), scene.join("motion.txt"));
    let o = mod2t(&["eval", "--pred", p(&gt), "--pred-motion", p(&motion), "--gt", p(&gt), "--motion-gt", p(&motion)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(o.stdout).unwrap();
    assert_eq!(kv(&report, "mvf1"), "1.000000");
    assert_eq!(kv(&report, "mota"), "1.000000");
}

#[test]
fn fuse_is_deterministic_and_scores_well() {
    let dir = TempDir::new().unwrap();
    let scene = synth(&dir, SCENE, "2");
    let (frames, gt, motion) = (scene.join("frames"), scene.join("gt.txt"), scene.join("motion.txt"));
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    for out in [&a, &b] {
        let o = mod2t(&["fuse", "--frames", p(&frames), "--deep-tracks", p(&gt), "--out", p(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let fused = std::fs::read(&a).unwrap();
    assert_eq!(fused, std::fs::read(&b).unwrap());
    let text = String::from_utf8(fused).unwrap();
    assert_eq!(text.lines().count(), 48);
    assert!(text.lines().all(|l| l.split(',').count() == 11));

    let o = mod2t(&["eval", "--pred", p(&a), "--gt", p(&gt), "--motion-gt", p(&motion)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(o.stdout).unwrap();
    let mvf1: f64 = kv(&report, "mvf1").parse().unwrap();
    assert!(mvf1 > 0.9, "{report}");
}

#[test]
fn fuse_without_traditional_tracks_keeps_deep_boxes() {
    let dir = TempDir::new().unwrap();
    let scene = synth(&dir, STATIC_SCENE, "4");
    let (frames, gt) = (scene.join("frames"), scene.join("gt.txt"));
    let tra = dir.path().join("tra.txt");
    let o = mod2t(&["track-tra", "--frames", p(&frames), "--out", p(&tra)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&tra).unwrap(), "");

    let out = dir.path().join("fused.txt");
    let o = mod2t(&["fuse", "--frames", p(&frames), "--deep-tracks", p(&gt), "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let boxes = |text: &str| -> Vec<String> {
        text.lines()
            .map(|l| l.split(',').take(6).collect::<Vec<_>>().join(","))
            .collect()
    };
    let gt_text = std::fs::read_to_string(&gt).unwrap();
    let fused = std::fs::read_to_string(&out).unwrap();
    assert_eq!(boxes(&gt_text), boxes(&fused));
    // nothing moves: every judged row is labeled static
    for l in fused.lines() {
        let label = l.rsplit(',').next().unwrap();
        assert!(label == "0" || label == "-1", "{l}");
    }
}

#[test]
fn judge_and_bgsub_outputs() {
    let dir = TempDir::new().unwrap();
    let scene = synth(&dir, SCENE, "5");
    let (frames, gt) = (scene.join("frames"), scene.join("gt.txt"));
    let verdicts = dir.path().join("verdicts.txt");
    let o = mod2t(&["judge", "--frames", p(&frames), "--deep-tracks", p(&gt), "--out", p(&verdicts)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&verdicts).unwrap();
    assert_eq!(text.lines().count(), 48);
    // the first frame_gap frames cannot be judged
    assert!(text.lines().take(6).all(|l| l.ends_with(",-1")));

    let bg = dir.path().join("bg");
    let o = mod2t(&["bgsub", "--frames", p(&frames), "--out", p(&bg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_dir(bg.join("masks")).unwrap().count(), 24);
    assert!(bg.join("blobs.txt").exists());
}

#[test]
fn bf_trend_csv() {
    let dir = TempDir::new().unwrap();
    let scene = synth(&dir, SCENE, "6");
    let out = dir.path().join("trend.csv");
    let o = mod2t(&[
        "bf-trend",
        "--gt",
        p(&scene.join("gt.txt")),
        "--motion-gt",
        p(&scene.join("motion.txt")),
        "--out",
        p(&out),
        "--fractions",
        "0,0.5,1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<Vec<String>> = csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3);
    let adaptive: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(adaptive.windows(2).all(|w| w[1] <= w[0]), "{csv}");
    assert_eq!(rows[2][5], "0.000000");
}

#[test]
fn usage_errors_exit_2() {
    let o = mod2t(&["fuse", "--frames"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_line(&o).starts_with("error kind=usage msg=\""));
    let o = mod2t(&["nonsense"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn io_errors_exit_3_without_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("fused.txt");
    let missing = dir.path().join("nope.txt");
    let o = mod2t(&["fuse", "--frames", p(dir.path()), "--deep-tracks", p(&missing), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr_line(&o).starts_with("error kind=io msg=\""));
    assert!(!out.exists());
}

#[test]
fn validation_errors_exit_4_without_output() {
    let dir = TempDir::new().unwrap();
    let scene = synth(&dir, SCENE, "7");
    let (frames, gt) = (scene.join("frames"), scene.join("gt.txt"));
    let out = dir.path().join("fused.txt");

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "lambda = 0.3\nr = 2\n").unwrap();
    let o = mod2t(&["fuse", "--config", p(&cfg), "--frames", p(&frames), "--deep-tracks", p(&gt), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr_line(&o).starts_with("error kind=validation"));
    assert!(!out.exists());

    let bad_tracks = dir.path().join("bad.txt");
    std::fs::write(&bad_tracks, "1,1,0,0,10,10,-1,-1,-1\n1,1,5,5,10,10,-1,-1,-1\n").unwrap();
    let o = mod2t(&["fuse", "--frames", p(&frames), "--deep-tracks", p(&bad_tracks), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(!out.exists());

    let o = mod2t(&["fuse", "--prior-mota", "abc", "--frames", p(&frames), "--deep-tracks", p(&gt), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2));

    // synth refuses to write into a non-empty directory
    let script = dir.path().join("scene.txt");
    let o = mod2t(&["synth", "--script", p(&script), "--out", p(&scene)]);
    assert_eq!(o.status.code(), Some(4));
}
