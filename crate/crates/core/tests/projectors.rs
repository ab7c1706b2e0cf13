use deft_core::linalg::{fft_rows, svd};
use deft_core::projector::{
    choose_side, deft_build, energy_spectrum, project, project_back, projection_error, select_top_k, svd_build,
    Method, ProjectionConfig, ProjectorBasis, Side, SideMode, SketchLayout,
};
use deft_core::RealMatrix;
use proptest::prelude::*;

fn low_rank(m: usize, n: usize, r: usize, seed: u64) -> RealMatrix {
    let a = RealMatrix::seeded_gaussian(m, r, seed);
    let b = RealMatrix::seeded_gaussian(n, r, seed.wrapping_add(1));
    a.matmul_tr(&b).unwrap()
}

fn config(method: Method, rank: usize) -> ProjectionConfig {
    ProjectionConfig {
        method,
        rank,
        rsvd_oversampling: 0,
        rsvd_seed: 5,
        ..Default::default()
    }
}

fn shape_and_rank() -> impl Strategy<Value = (RealMatrix, usize)> {
    (2usize..30, 2usize..30, any::<u64>()).prop_flat_map(|(m, n, seed)| {
        (Just(RealMatrix::seeded_gaussian(m, n, seed)), 1..=m.min(n))
    })
}

#[test]
fn conjugate_bins_carry_equal_energy() {
    let g = RealMatrix::seeded_gaussian(7, 12, 3);
    let s = energy_spectrum(&fft_rows(&g).unwrap());
    for j in 1..12 {
        assert!((s[j] - s[12 - j]).abs() < 1e-10 * s[j]);
    }
}

#[test]
fn top_k_matches_a_sorting_oracle() {
    let scores = [0.5, 3.0, 3.0, 1.0, 7.0, 0.0, 3.0];
    // stable descending sort by hand: 7.0@4, 3.0@1, 3.0@2, 3.0@6, 1.0@3, ...
    assert_eq!(select_top_k(&scores, 1).unwrap(), vec![4]);
    assert_eq!(select_top_k(&scores, 3).unwrap(), vec![1, 2, 4]);
    assert_eq!(select_top_k(&scores, 4).unwrap(), vec![1, 2, 4, 6]);
}

#[test]
fn deft_prefers_the_dominant_frequency() {
    // every row is a pure cosine at bin 3 of 16 plus a small constant
    let g = RealMatrix::from_fn(5, 16, |i, l| {
        (i as f64 + 1.0) * (2.0 * std::f64::consts::PI * 3.0 * l as f64 / 16.0).cos() + 0.01
    });
    let p = deft_build(&g, 1, SketchLayout::Interleaved).unwrap();
    assert!(projection_error(&g, &p).unwrap() < 0.05 * g.frobenius_norm());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn every_builder_is_orthonormal_and_deterministic((g, k) in shape_and_rank()) {
        for method in Method::ALL {
            let cfg = config(method, k);
            let a = cfg.build(&g, 0).unwrap();
            prop_assert!(a.basis.orthonormality_defect() < 1e-10, "{}", method);
            prop_assert_eq!(a.dim(), g.rows());
            if method != Method::Identity {
                prop_assert_eq!(a.rank(), k);
            }
            prop_assert_eq!(&a, &cfg.build(&g, 0).unwrap());
        }
    }

    #[test]
    fn deft_never_beats_truncated_svd((g, k) in shape_and_rank()) {
        let norm = g.frobenius_norm();
        for layout in [SketchLayout::Interleaved, SketchLayout::Block] {
            let deft = projection_error(&g, &deft_build(&g, k, layout).unwrap()).unwrap();
            let best = projection_error(&g, &svd_build(&g, k).unwrap()).unwrap();
            prop_assert!(deft >= best - 1e-10);
            prop_assert!(deft <= norm * (1.0 + 1e-12));
        }
    }

    #[test]
    fn projections_are_non_expansive((g, k) in shape_and_rank()) {
        for method in Method::ALL {
            let p = config(method, k).build(&g, 0).unwrap();
            let reduced = project(&p, &g).unwrap();
            prop_assert!(reduced.frobenius_norm() <= g.frobenius_norm() * (1.0 + 1e-12));
            prop_assert!(projection_error(&g, &p).unwrap() <= g.frobenius_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn deft_recovers_low_rank_exactly(r in prop::sample::select(vec![1usize, 2, 4]), m in 10usize..40, n in 10usize..40, seed in any::<u64>()) {
        let g = low_rank(m, n, r, seed);
        let s = svd(&g).unwrap().s;
        prop_assert!(s[r] < 1e-10 * s[0]);
        let k = (2 * r).min(m.min(n));
        let p = deft_build(&g, k, SketchLayout::Interleaved).unwrap();
        prop_assert!(projection_error(&g, &p).unwrap() < 1e-8);
    }

    #[test]
    fn deft_at_full_rank_spans_the_column_space(m in 2usize..30, n in 2usize..30, seed in any::<u64>()) {
        let g = RealMatrix::seeded_gaussian(m, n, seed);
        for layout in [SketchLayout::Interleaved, SketchLayout::Block] {
            let p = deft_build(&g, m.min(n), layout).unwrap();
            prop_assert!(projection_error(&g, &p).unwrap() < 1e-9 * g.frobenius_norm());
        }
    }

    #[test]
    fn right_projection_mirrors_left_on_the_transpose((g, k) in shape_and_rank()) {
        let gt = g.transpose();
        for method in [Method::Deft, Method::Svd, Method::Dct] {
            let cfg = config(method, k);
            let left_of_t = cfg.build(&gt, 0).unwrap();
            let right = left_of_t.clone().with_side(Side::Right);
            let a = project(&right, &g).unwrap();
            let b = project(&left_of_t, &gt).unwrap();
            prop_assert!(a.max_abs_diff(&b.transpose()) < 1e-12);
            let back = project_back(&right, &a).unwrap();
            prop_assert_eq!(back.shape(), g.shape());
            prop_assert!((projection_error(&g, &right).unwrap() - projection_error(&gt, &left_of_t).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn side_choice_is_symmetric(m in 1usize..100, n in 1usize..100) {
        let std = choose_side(m, n, SideMode::Std);
        let rev = choose_side(m, n, SideMode::ReverseStd);
        prop_assert_ne!(std, rev);
        if m != n {
            prop_assert_eq!(choose_side(n, m, SideMode::Std), rev);
        }
    }

    #[test]
    fn external_bases_are_validated(m in 2usize..20, k in 1usize..20, seed in any::<u64>()) {
        let k = k.min(m);
        let g = RealMatrix::seeded_gaussian(m, m, seed);
        let q = svd(&g).unwrap().u.first_columns(k);
        prop_assert!(ProjectorBasis::new(q.clone(), Side::Left, Method::Svd, 0).is_ok());
        prop_assert!(ProjectorBasis::new(q.scaled(1.1), Side::Left, Method::Svd, 0).is_err());
    }
}
