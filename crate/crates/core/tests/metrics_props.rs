use proptest::prelude::*;
use quadtrack::dataset::load_dataset;
use quadtrack::eval::{
    alignment_error, default_al_thresholds, jaccard_error, jaccard_error_axis_aligned, robustness_curve, success_curve,
    FailureMode, FrameResult, Metric, SubsequenceRun,
};
use quadtrack::geom::{apply_warp, params_to_matrix};
use quadtrack::synth::scenarios::Scenario;
use quadtrack::synth::{export, random_trajectory, render, StepCaps, SynthSpec};
use quadtrack::synth::textures::checker_noise;
use quadtrack::{CornerQuad, GrayImage, Point2, SimilarityParams};

fn quad() -> impl Strategy<Value = CornerQuad> {
    (-50.0..50.0f64, -50.0..50.0f64, 1.0..40.0f64, 1.0..40.0f64, -80.0..80.0f64).prop_map(|(x, y, w, h, r)| {
        let m = params_to_matrix(&SimilarityParams::new(x, y, 1.0, r));
        apply_warp(&m, &CornerQuad::centered_rect(w, h)).unwrap()
    })
}

fn rect() -> impl Strategy<Value = CornerQuad> {
    (-20.0..20.0f64, -20.0..20.0f64, 0.5..30.0f64, 0.5..30.0f64).prop_map(|(x, y, w, h)| CornerQuad::from_rect(x, y, w, h))
}

fn scaled(q: &CornerQuad, c: Point2, s: f64) -> CornerQuad {
    CornerQuad::new(q.corners.map(|p| c + (p - c) * s))
}

fn run(errors: &[Option<f64>]) -> SubsequenceRun {
    let gt = CornerQuad::from_rect(0.0, 0.0, 10.0, 10.0);
    let frames = errors
        .iter()
        .enumerate()
        .map(|(i, e)| FrameResult::new(i + 1, e.map(|d| gt.translated(Point2::new(d, 0.0))), gt))
        .collect();
    SubsequenceRun { sequence_id: "toy".into(), init_frame: 0, frames }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn alignment_symmetric_and_translation_invariant(a in quad(), b in quad(), dx in -100.0..100.0f64, dy in -100.0..100.0f64) {
        let e = alignment_error(&a, &b);
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e, alignment_error(&b, &a));
        let d = Point2::new(dx, dy);
        prop_assert!((alignment_error(&a.translated(d), &b.translated(d)) - e).abs() < 1e-9);
    }

    #[test]
    fn jaccard_symmetric_scale_invariant_bounded(a in quad(), b in quad(), cx in -30.0..30.0f64, cy in -30.0..30.0f64, s in 0.2..5.0f64) {
        let e = jaccard_error(&a, &b);
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert!((e - jaccard_error(&b, &a)).abs() < 1e-12);
        let c = Point2::new(cx, cy);
        prop_assert!((jaccard_error(&scaled(&a, c, s), &scaled(&b, c, s)) - e).abs() < 1e-12);
    }

    #[test]
    fn jaccard_matches_axis_aligned_path(a in rect(), b in rect()) {
        prop_assert!((jaccard_error(&a, &b) - jaccard_error_axis_aligned(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn curves_bounded_and_monotone(errs in proptest::collection::vec(proptest::option::weighted(0.9, 0.0..25.0f64), 1..30), fail_stop in any::<bool>()) {
        let runs = vec![run(&errs), run(&errs[errs.len() / 2..])];
        let th = default_al_thresholds();
        let mode = if fail_stop { FailureMode::FailStop } else { FailureMode::Independent };
        let s = success_curve(&runs, &th, Metric::Alignment, mode).unwrap();
        let r = robustness_curve(&runs, &th, Metric::Alignment).unwrap();
        for c in [&s, &r] {
            prop_assert!(c.values.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(c.values.windows(2).all(|w| w[0] <= w[1]));
        }
        let total: usize = runs.iter().map(|r| r.frames.len()).sum();
        let tracked = runs.iter().flat_map(|r| &r.frames).filter(|f| !f.is_lost()).count();
        let inf = success_curve(&runs, &[f64::INFINITY], Metric::Alignment, FailureMode::Independent).unwrap();
        prop_assert_eq!(inf.values[0], tracked as f64 / total as f64);
    }

    #[test]
    fn random_walk_respects_caps(seed in any::<u64>(), t in 0.0..5.0f64, s in 0.0..0.05f64, r in 0.0..5.0f64) {
        let caps = StepCaps { translation: t, scale: s, rotation: r };
        let start = SimilarityParams::new(100.0, 80.0, 1.0, 0.0);
        let traj = random_trajectory(300, seed, start, caps);
        prop_assert_eq!(traj.len(), 300);
        prop_assert_eq!(traj[0], start);
        for w in traj.windows(2) {
            prop_assert!((w[1].tx - w[0].tx).hypot(w[1].ty - w[0].ty) <= t + 1e-12);
            prop_assert!((w[1].scale - w[0].scale).abs() <= s + 1e-12);
            prop_assert!((w[1].rotation - w[0].rotation).abs() <= r + 1e-12);
            prop_assert!((0.5..=2.0).contains(&w[1].scale));
        }
        prop_assert_eq!(traj, random_trajectory(300, seed, start, caps));
    }
}

#[test]
fn random_walk_caps_over_ten_thousand_steps() {
    let caps = StepCaps { translation: 2.0, scale: 0.01, rotation: 1.5 };
    let traj = random_trajectory(10_000, 42, SimilarityParams::new(0.0, 0.0, 1.0, 0.0), caps);
    for w in traj.windows(2) {
        assert!((w[1].tx - w[0].tx).hypot(w[1].ty - w[0].ty) <= 2.0 + 1e-12);
        assert!((w[1].scale - w[0].scale).abs() <= 0.01 + 1e-12);
        assert!((w[1].rotation - w[0].rotation).abs() <= 1.5 + 1e-12);
    }
    let zero = random_trajectory(50, 1, SimilarityParams::new(5.0, 6.0, 1.1, 3.0), StepCaps { translation: 0.0, scale: 0.0, rotation: 0.0 });
    assert!(zero.iter().all(|p| *p == zero[0]));
}

#[test]
fn renders_are_seeded() {
    let a = Scenario::LowTextureNoisy.render(5).unwrap();
    let b = Scenario::LowTextureNoisy.render(5).unwrap();
    let c = Scenario::LowTextureNoisy.render(6).unwrap();
    assert_eq!(a.frames, b.frames);
    assert_ne!(a.frames, c.frames);
}

#[test]
fn export_round_trips_and_self_scores_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let traj = random_trajectory(12, 3, SimilarityParams::new(80.0, 60.0, 1.0, 0.0), StepCaps { translation: 2.0, scale: 0.02, rotation: 2.0 });
    let spec = SynthSpec::new(checker_noise(40, 30, 5, 1), GrayImage::filled(160, 120, 0.5), traj);
    let seq = render(&spec).unwrap();
    let files = export(&seq, tmp.path()).unwrap();
    assert_eq!(files.len(), seq.len() + 1);
    let ds = load_dataset(tmp.path()).unwrap();
    assert_eq!(ds.len(), 12);
    assert_eq!(ds.gt, seq.gt);
    for (i, g) in seq.gt.iter().enumerate() {
        assert_eq!(*g, apply_warp(&params_to_matrix(&spec.trajectory[i]), &spec.base_quad()).unwrap());
    }
    let outputs: Vec<Option<CornerQuad>> = ds.gt[1..].iter().copied().map(Some).collect();
    let r = SubsequenceRun::evaluate("x", 0, &outputs, &ds.gt).unwrap();
    assert!(r.frames.iter().all(|f| f.e_al == 0.0 && f.e_jac == 0.0));
}
