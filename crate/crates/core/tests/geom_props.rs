use proptest::prelude::*;
use quadtrack::geom::{apply_warp, fit_similarity, matrix_to_params, params_to_matrix};
use quadtrack::lk::delta_warp;
use quadtrack::{CornerQuad, DofModel, Point2, SimilarityParams, WarpMatrix};

fn similarity() -> impl Strategy<Value = SimilarityParams> {
    (-50.0..50.0f64, -50.0..50.0f64, 0.3..3.0f64, -179.0..179.0f64)
        .prop_map(|(tx, ty, s, r)| SimilarityParams::new(tx, ty, s, r))
}

/// A random member of `dof`'s group, well away from singular.
fn member(dof: DofModel) -> impl Strategy<Value = WarpMatrix> {
    proptest::collection::vec(-0.3..0.3f64, 8).prop_map(move |v| {
        let mut p = v[..dof.dof()].to_vec();
        p[0] *= 30.0;
        p[1] *= 30.0;
        if dof == DofModel::Homography8 {
            p[6] *= 1e-2;
            p[7] *= 1e-2;
        }
        delta_warp(dof, &p)
    })
}

fn any_dof() -> impl Strategy<Value = DofModel> {
    prop::sample::select(DofModel::ALL.to_vec())
}

fn points(n: usize) -> impl Strategy<Value = Vec<Point2>> {
    proptest::collection::vec((-100.0..100.0f64, -100.0..100.0f64), n)
        .prop_map(|v| v.into_iter().map(|(x, y)| Point2::new(x, y)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn compose_and_invert_stay_in_group(
        (dof, a, b) in any_dof().prop_flat_map(|d| (Just(d), member(d), member(d)))
    ) {
        prop_assert!(dof.contains(&a.compose(&b), 1e-9));
        let inv = a.invert().unwrap();
        prop_assert!(dof.contains(&inv, 1e-9));
        prop_assert!(a.compose(&inv).max_abs_diff(&WarpMatrix::default()) < 1e-10);
    }

    #[test]
    fn similarity_inverse_is_exact(p in similarity()) {
        let m = params_to_matrix(&p);
        prop_assert!(m.compose(&m.invert().unwrap()).max_abs_diff(&WarpMatrix::default()) < 1e-10);
        prop_assert!(DofModel::Similarity4.contains(&m.compose(&params_to_matrix(&p)), 1e-9));
    }

    #[test]
    fn params_round_trip(p in similarity()) {
        let q = matrix_to_params(&params_to_matrix(&p));
        prop_assert!((q.tx - p.tx).abs() < 1e-12 && (q.ty - p.ty).abs() < 1e-12);
        prop_assert!((q.scale - p.scale).abs() < 1e-12);
        let dr = (q.rotation - p.rotation).rem_euclid(360.0);
        prop_assert!(dr.min(360.0 - dr) < 1e-10);
    }

    #[test]
    fn similarity_scales_area_by_s_squared(p in similarity(), w in 1.0..80.0f64, h in 1.0..80.0f64) {
        let q = CornerQuad::from_rect(-3.0, 7.0, w, h);
        let out = apply_warp(&params_to_matrix(&p), &q).unwrap();
        let want = q.area() * p.scale * p.scale;
        prop_assert!((out.area() - want).abs() <= 1e-9 * want);
    }

    #[test]
    fn fit_recovers_and_ignores_order(p in similarity(), src in points(10), seed in any::<u64>()) {
        let m = params_to_matrix(&p);
        let dst: Vec<Point2> = src.iter().map(|&s| m.apply(s).unwrap()).collect();
        let fit = fit_similarity(&src, &dst).unwrap();
        prop_assert!(params_to_matrix(&fit).max_abs_diff(&m) < 1e-9);

        let mut idx: Vec<usize> = (0..src.len()).collect();
        let mut r = seed;
        for i in (1..idx.len()).rev() {
            r = r.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            idx.swap(i, (r >> 33) as usize % (i + 1));
        }
        let noisy: Vec<Point2> = dst.iter().enumerate().map(|(i, d)| *d + Point2::new((i % 3) as f64 * 0.1, (i % 2) as f64 * -0.2)).collect();
        let a = fit_similarity(&src, &noisy).unwrap();
        let s2: Vec<Point2> = idx.iter().map(|&i| src[i]).collect();
        let d2: Vec<Point2> = idx.iter().map(|&i| noisy[i]).collect();
        let b = fit_similarity(&s2, &d2).unwrap();
        prop_assert!(params_to_matrix(&a).max_abs_diff(&params_to_matrix(&b)) < 1e-9);
    }
}
