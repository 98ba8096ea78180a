use std::path::Path;

use mod2t_core::assignment::max_weight_matching;
use mod2t_core::fuse::{compute_box_weights, fuse_boxes, fuse_theta, theta_from_ratio};
use mod2t_core::geometry::{AffineTransform, BoundingBox, Point};
use mod2t_core::io::{format_annotations, format_fused, format_tracks, parse_annotations, parse_fused, parse_tracks, RunConfig};
use mod2t_core::judge::{combine, motion_score};
use mod2t_core::metrics::{mvf1_from_counts, BfMode};
use mod2t_core::registration::WarpChain;
use mod2t_core::synth::{degrade_tracks, Actor, MotionPath, SceneScript};
use mod2t_core::{iou, mahalanobis_distance, Fused, MotionAnnotation, MotionState, Source, Track};
use proptest::prelude::*;

fn bbox() -> impl Strategy<Value = BoundingBox<f64>> {
    (0.0..300.0f64, 0.0..300.0f64, 1.0..80.0f64, 1.0..80.0f64)
        .prop_map(|(x, y, w, h)| BoundingBox::new(x, y, w, h).unwrap())
}

/// Values exactly representable in the six-decimal file layout.
fn grid(lo: i64, hi: i64) -> impl Strategy<Value = f64> {
    (lo..hi).prop_map(|v| v as f64 / 1e6)
}

fn state() -> impl Strategy<Value = MotionState> {
    prop_oneof![Just(MotionState::Static), Just(MotionState::Moving), Just(MotionState::Unknown)]
}

/// All partial one-to-one assignments of a small matrix, best gated total.
fn brute_best(w: &[Vec<f64>], gate: f64) -> f64 {
    fn go(i: usize, w: &[Vec<f64>], gate: f64, used: &mut [bool]) -> f64 {
        if i == w.len() {
            return 0.0;
        }
        let mut best = go(i + 1, w, gate, used);
        for j in 0..used.len() {
            if !used[j] && w[i][j] >= gate && w[i][j] > 0.0 {
                used[j] = true;
                best = best.max(w[i][j] + go(i + 1, w, gate, used));
                used[j] = false;
            }
        }
        best
    }
    let cols = w.first().map_or(0, Vec::len);
    go(0, w, gate, &mut vec![false; cols])
}

proptest! {
    #[test]
    fn iou_is_symmetric_and_bounded(a in bbox(), b in bbox()) {
        let (ab, ba) = (iou(&a, &b), iou(&b, &a));
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(iou(&a, &a), 1.0);
    }

    #[test]
    fn mahalanobis_scales_with_reference(a in bbox(), b in bbox(), s in 0.5..4.0f64) {
        let d = mahalanobis_distance(&a, &b).unwrap();
        prop_assert!(d >= 0.0);
        // doubling the reference extents about the same center halves the distance
        let big = BoundingBox::from_center(a.center(), a.w * s, a.h * s).unwrap();
        let ds = mahalanobis_distance(&big, &b).unwrap();
        prop_assert!((ds * s - d).abs() < 1e-9 * d.max(1.0));
    }

    #[test]
    fn motion_score_is_monotone(d1 in 0.0..20.0f64, d2 in 0.0..20.0f64, beta in 0.1..10.0f64) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(motion_score(lo, beta) >= motion_score(hi, beta));
        prop_assert!((0.0..=1.0).contains(&motion_score(d1, beta)));
    }

    #[test]
    fn combined_theta_is_a_mixture(aa in proptest::option::of(-0.5..1.5f64), am in 0.0..1.0f64, lambda in 0.0..1.0f64) {
        let v = combine(aa, am, lambda, 0.5);
        prop_assert!((0.0..=1.0).contains(&v.theta));
        prop_assert_eq!(v.label == MotionState::Static, v.theta > 0.5);
        if aa.is_none() {
            prop_assert_eq!(v.theta, am);
        }
    }

    #[test]
    fn matching_is_optimal_one_to_one(
        w in proptest::collection::vec(proptest::collection::vec(0.0..1.0f64, 4), 1..5),
        gate in 0.0..0.6f64,
    ) {
        let m = max_weight_matching(&w, gate);
        let mut rows: Vec<_> = m.iter().map(|p| p.0).collect();
        let mut cols: Vec<_> = m.iter().map(|p| p.1).collect();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(rows.len(), m.len());
        prop_assert_eq!(cols.len(), m.len());
        prop_assert!(m.iter().all(|&(r, c)| w[r][c] >= gate));
        let total: f64 = m.iter().map(|&(r, c)| w[r][c]).sum();
        prop_assert!((total - brute_best(&w, gate)).abs() < 1e-9);
    }

    #[test]
    fn fusion_stays_between_inputs(
        d in bbox(), t in bbox(),
        mt in 0.0..1.0f64, md in 0.01..1.0f64, alpha in 0.0..1.0f64,
        td in 0.0..1.0f64, tt in 0.0..1.0f64, ft in 0.01..1.0f64, fd in 0.01..1.0f64,
    ) {
        let w = compute_box_weights(mt, md, alpha).unwrap();
        prop_assert!((w.0 + w.1 - 1.0).abs() < 1e-12);
        let f = fuse_boxes(&d, Some(&t), w);
        for (o, a, b) in [(f.x, d.x, t.x), (f.y, d.y, t.y), (f.w, d.w, t.w), (f.h, d.h, t.h)] {
            prop_assert!(o >= a.min(b) - 1e-9 && o <= a.max(b) + 1e-9);
        }
        prop_assert_eq!(fuse_boxes(&d, None, w), d);
        let th = fuse_theta(td, tt, ft, fd);
        prop_assert!(th >= td.min(tt) - 1e-12 && th <= td.max(tt) + 1e-12);
    }

    #[test]
    fn ratio_theta_saturates(ratio in 0.0..1.0f64, r in 0.01..1.0f64) {
        let t = theta_from_ratio(ratio, r);
        prop_assert!((0.0..=1.0).contains(&t));
        if ratio >= r {
            prop_assert_eq!(t, 1.0);
        }
    }

    #[test]
    fn mvf1_bounds(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50, bf in 0.0..1.0f64) {
        let (p, r, f) = mvf1_from_counts(tp, fp, fn_, bf);
        for v in [p, r, f] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let (_, r1, _) = mvf1_from_counts(tp, fp, fn_, 1.0);
        prop_assert!(r >= r1);
    }

    #[test]
    fn track_file_round_trip(
        rows in proptest::collection::btree_map(
            (1u32..30, 1u32..20),
            (grid(-1_000_000, 300_000_000), grid(-1_000_000, 300_000_000), grid(1_000_000, 90_000_000), grid(1_000_000, 90_000_000), proptest::option::of(grid(0, 1_000_000))),
            0..40,
        )
    ) {
        let recs: Vec<Track> = rows
            .iter()
            .map(|(&(f, id), &(x, y, w, h, c))| {
                let mut b = BoundingBox::new(x, y, w, h).unwrap();
                b.confidence = c;
                Track::new(f, id, b, Source::Deep)
            })
            .collect();
        let text = format_tracks(&recs);
        let back = parse_tracks(&text, Path::new("t"), Source::Deep).unwrap();
        prop_assert_eq!(&back, &recs);
        prop_assert_eq!(format_tracks(&back), text);
    }

    #[test]
    fn annotation_round_trip(rows in proptest::collection::btree_map((1u32..50, 1u32..20), state(), 0..60)) {
        let ann: Vec<MotionAnnotation> = rows
            .iter()
            .map(|(&(frame, track_id), &state)| MotionAnnotation { frame, track_id, state })
            .collect();
        let back = parse_annotations(&format_annotations(&ann), Path::new("a")).unwrap();
        prop_assert_eq!(back, ann);
    }

    #[test]
    fn fused_round_trip(
        rows in proptest::collection::btree_map(
            (1u32..30, 1u32..20),
            (grid(0, 200_000_000), grid(1_000_000, 50_000_000), proptest::option::of(grid(0, 1_000_000)), state()),
            0..30,
        )
    ) {
        let recs: Vec<Fused> = rows
            .iter()
            .map(|(&(frame, track_id), &(x, w, theta, label))| Fused {
                frame,
                track_id,
                bbox: BoundingBox::new(x, x, w, w).unwrap(),
                theta: if label.is_known() { theta.or(Some(0.5)) } else { None },
                label,
                visibility: None,
            })
            .collect();
        let text = format_fused(&recs);
        let back = parse_fused(&text, Path::new("f")).unwrap();
        prop_assert_eq!(&back, &recs);
    }

    #[test]
    fn config_round_trip(
        lambda in 0.0..1.0f64, prior in proptest::option::of(-1.0..1.0f64), r in 0.01..1.0f64,
        grid_cell in 2usize..16, gap in 1usize..8, eps in 1e-6..1e-2f64, sigma in prop_oneof![Just(0.0), 1.0..6.0f64],
    ) {
        let mut c = RunConfig::default();
        c.judge.lambda = lambda;
        c.fusion.prior_mota = prior;
        c.fusion.r = r;
        c.bg.grid_cell = grid_cell;
        c.judge.frame_gap = gap;
        c.registration.convergence_eps = eps;
        c.registration.outlier_sigma = sigma;
        let back = RunConfig::parse(&c.to_text(), Path::new("c")).unwrap();
        prop_assert_eq!(back, c);
    }

    #[test]
    fn warp_chain_composes(steps in proptest::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 1..6)) {
        let chain = WarpChain::from_steps(steps.iter().map(|&(x, y)| AffineTransform::translation(x, y)).collect());
        let n = steps.len();
        let total = chain.between(0, n).unwrap();
        let sx: f64 = steps.iter().map(|s| s.0).sum();
        let sy: f64 = steps.iter().map(|s| s.1).sum();
        let p = total.apply(Point::new(0.0, 0.0));
        prop_assert!((p.x - sx).abs() < 1e-9 && (p.y - sy).abs() < 1e-9);
        prop_assert_eq!(chain.between(2, 2).map(|t| t.max_abs_diff(&AffineTransform::identity()) == 0.0), if n >= 2 { Some(true) } else { chain.between(2, 2).map(|_| true) });
    }
}

fn small_scene() -> SceneScript {
    SceneScript {
        width: 96,
        height: 72,
        frames: 12,
        actors: (1..=10)
            .map(|id| Actor {
                id,
                spawn: 1,
                despawn: 12,
                size: (8.0, 8.0),
                path: MotionPath::Linear {
                    x: 4.0 + (id as f64 - 1.0) * 8.0,
                    y: 10.0,
                    vx: 0.0,
                    vy: (id % 3) as f64,
                },
                intensity: 200,
            })
            .collect(),
        ..Default::default()
    }
}

#[test]
fn render_is_seed_deterministic() {
    let s = small_scene();
    let (a, b, c) = (s.render(5).unwrap(), s.render(5).unwrap(), s.render(6).unwrap());
    assert_eq!(a.frames, b.frames);
    assert_ne!(a.frames, c.frames);
    assert_eq!(format_tracks(&a.ground_truth), format_tracks(&b.ground_truth));
    assert_eq!(a.motion, b.motion);
}

#[test]
fn degradation_counts() {
    let gt = small_scene().render(1).unwrap().ground_truth;
    let ids = |r: &[Track]| r.iter().map(|x| x.track_id).collect::<std::collections::BTreeSet<_>>().len();
    assert_eq!(degrade_tracks(&gt, 0.0, 0.0, 3).unwrap(), gt);
    assert!(degrade_tracks(&gt, 1.0, 0.0, 3).unwrap().is_empty());
    let half = degrade_tracks(&gt, 0.5, 0.0, 3).unwrap();
    assert_eq!(ids(&half), 5);
    assert_eq!(half, degrade_tracks(&gt, 0.5, 0.0, 3).unwrap());
    assert!(degrade_tracks(&gt, 1.5, 0.0, 3).is_err());
}

#[test]
fn script_text_round_trip() {
    let mut s = small_scene();
    s.actors[0].path = MotionPath::Waypoints(vec![(1, 4.0, 10.0), (12, 20.0, 30.0)]);
    s.beta_d = Some(1.5);
    let back = SceneScript::parse(&s.to_text(), Path::new("s")).unwrap();
    assert_eq!(back, s);
}

#[test]
fn bf_mode_fixed_one_matches_plain_recall() {
    let (_, r, _) = mvf1_from_counts::<f64>(6, 2, 2, 1.0);
    assert!((r - 0.75).abs() < 1e-12);
    assert_eq!(BfMode::Fixed(0.5), BfMode::<f64>::Fixed(0.5));
}
