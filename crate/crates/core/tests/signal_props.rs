use proptest::prelude::*;
use quadtrack::dcf::{peak_locate, DcfModel};
use quadtrack::imgproc::{hog, HOG_BINS};
use quadtrack::imgproc::{cosine_window, extract_patch, gaussian_label_1d, gaussian_label_2d, gradient};
use quadtrack::synth::textures::smooth_noise;
use quadtrack::{FeatureMap, GrayImage, Point2};

fn random_map(w: usize, h: usize, d: usize) -> impl Strategy<Value = FeatureMap> {
    proptest::collection::vec(-1.0..1.0f64, w * h * d).prop_map(move |v| FeatureMap::from_vec(w, h, d, v).unwrap())
}

fn image(w: usize, h: usize) -> impl Strategy<Value = GrayImage> {
    any::<u64>().prop_map(move |seed| smooth_noise(w, h, 6.0, seed, 0.0, 1.0))
}

fn circular_shift(x: &FeatureMap, du: usize, dv: usize) -> FeatureMap {
    let (w, h, d) = x.shape();
    let mut out = FeatureMap::zeros(w, h, d);
    for c in 0..d {
        for y in 0..h {
            for xx in 0..w {
                out.set(c, (xx + du) % w, (y + dv) % h, x.get(c, xx, y));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hog_bounded(img in image(24, 20), cell in 2usize..6) {
        let f = hog(&img, cell).unwrap();
        prop_assert!(f.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn hog_orientation_invariant_to_gain_and_offset(img in image(24, 24), gain in 0.2..3.0f64, offset in -0.5..0.5f64) {
        let a = hog(&img, 4).unwrap();
        let b = hog(&img.map(|v| v + offset), 4).unwrap();
        let c = hog(&img.map(|v| gain * v), 4).unwrap();
        for ch in 0..HOG_BINS {
            for (i, &v) in a.channel(ch).iter().enumerate() {
                prop_assert!((v - b.channel(ch)[i]).abs() < 1e-12);
                prop_assert!((v - c.channel(ch)[i]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn identity_extract_is_idempotent(img in image(16, 12)) {
        let centre = Point2::new(7.5, 5.5);
        let once = extract_patch(&img, centre, (16.0, 12.0), 1.0, 0.0, (16, 12)).unwrap();
        let twice = extract_patch(&once, centre, (16.0, 12.0), 1.0, 0.0, (16, 12)).unwrap();
        prop_assert_eq!(&once, &img);
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn label_2d_is_outer_product(w in 2usize..20, h in 2usize..20, sigma in 0.5..5.0f64) {
        let (lx, ly, l2) = (gaussian_label_1d(w, sigma), gaussian_label_1d(h, sigma), gaussian_label_2d(w, h, sigma, sigma));
        for y in 0..h {
            for x in 0..w {
                prop_assert!((l2[y * w + x] - lx[x] * ly[y]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn denominator_ignores_channel_order(x in random_map(6, 5, 3)) {
        let label = gaussian_label_2d(6, 5, 1.0, 1.0);
        let (w, h, _) = x.shape();
        let mut data = Vec::new();
        for c in [2, 0, 1] {
            data.extend_from_slice(x.channel(c));
        }
        let y = FeatureMap::from_vec(w, h, 3, data).unwrap();
        let a = DcfModel::train_init(&x, &label, 0.01).unwrap();
        let b = DcfModel::train_init(&y, &label, 0.01).unwrap();
        for (p, q) in a.denominator().iter().zip(b.denominator()) {
            prop_assert!((p - q).abs() <= 1e-12 * p.abs().max(1.0));
        }
    }

    #[test]
    fn response_is_linear_in_numerators(x in random_map(8, 8, 2), z in random_map(8, 8, 2), alpha in 0.1..10.0f64) {
        let label = gaussian_label_2d(8, 8, 1.0, 1.0);
        let m = DcfModel::train_init(&x, &label, 0.01).unwrap();
        let r = m.respond(&z).unwrap();
        let s = m.scaled_numerators(alpha).respond(&z).unwrap();
        for (a, b) in r.data.iter().zip(&s.data) {
            prop_assert!((a * alpha - b).abs() < 1e-12 * alpha.max(1.0) * (1.0 + a.abs()));
        }
        let (p, q) = (peak_locate(&r), peak_locate(&s));
        prop_assert!((p.dx - q.dx).abs() < 1e-9 && (p.dy - q.dy).abs() < 1e-9);
        prop_assert_eq!((p.dx.round(), p.dy.round()), (q.dx.round(), q.dy.round()));
    }

    #[test]
    fn shifted_sample_moves_the_peak(x in random_map(8, 8, 2), du in 0usize..8, dv in 0usize..8) {
        let label = gaussian_label_2d(8, 8, 1.0, 1.0);
        let m = DcfModel::train_init(&x, &label, 1e-4).unwrap();
        let r = m.respond(&circular_shift(&x, du, dv)).unwrap();
        let best = r.data.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        prop_assert_eq!((best % 8, best / 8), (du, dv));
    }

    #[test]
    fn init_is_an_update_fixed_point(x in random_map(7, 3, 2), eta in 0.01..1.0f64) {
        let label = gaussian_label_2d(7, 3, 1.0, 1.0);
        let m = DcfModel::train_init(&x, &label, 0.01).unwrap();
        let u = m.update(&x, eta).unwrap();
        for (a, b) in m.numerators().iter().zip(u.numerators()) {
            prop_assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }
}

/// Uses the tracker's own features (windowed HOG); on raw single-channel
/// intensities the inverse-filter-like solution often responds more strongly
/// to an unrelated patch.
#[test]
fn self_response_beats_unrelated_patches() {
    let label = gaussian_label_2d(12, 12, 1.0, 1.0);
    let window = cosine_window(12, 12);
    let features = |seed| {
        let mut m = hog(&smooth_noise(48, 48, 4.0, seed, 0.0, 1.0), 4).unwrap();
        m.apply_window(&window);
        m
    };
    for trial in 0..100u64 {
        let own = features(trial);
        let m = DcfModel::train_init(&own, &label, 0.01).unwrap();
        let own_peak = m.respond(&own).unwrap().max_value();
        let other_peak = m.respond(&features(trial + 1000)).unwrap().max_value();
        assert!(other_peak < own_peak, "trial {trial}: {other_peak} >= {own_peak}");
    }
}

#[test]
fn constant_image_has_zero_gradient() {
    let (gx, gy) = gradient(&GrayImage::filled(9, 7, 0.37));
    assert!(gx.data().iter().chain(gy.data()).all(|&v| v == 0.0));
}
