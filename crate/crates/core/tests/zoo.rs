use deft_core::zoo::{gradient_check, make_blobs, LinearRegression, MlpBlobs, Problem, QuadraticBowl};
use deft_core::{AdamWConfig, Method, ProjectionConfig, RankPolicy, RealMatrix, Trainer};
use proptest::prelude::*;

fn problems() -> Vec<Box<dyn Problem>> {
    vec![
        Box::new(QuadraticBowl::seeded(6, 5, 11)),
        Box::new(LinearRegression::seeded(40, 6, 3, 0.3, 12)),
        Box::new(MlpBlobs {
            data: make_blobs(13, 64, 8, 4, 3.0, 1.0).unwrap(),
            hidden: 10,
        }),
    ]
}

/// Random parameters at roughly the scale training visits.
fn random_point(p: &dyn Problem, seed: u64) -> Vec<RealMatrix> {
    p.shapes()
        .into_iter()
        .enumerate()
        .map(|(i, (r, c))| RealMatrix::seeded_gaussian(r, c, seed * 31 + i as u64).scaled(0.7))
        .collect()
}

#[test]
fn analytic_gradients_match_central_differences() {
    for p in problems() {
        for seed in 0..10 {
            let err = gradient_check(p.as_ref(), &random_point(p.as_ref(), seed), 1e-5).unwrap();
            assert!(err < 1e-6, "{} at point {seed}: {err:e}", p.name());
        }
    }
}

#[test]
fn linreg_gradient_is_tight_on_a_small_instance() {
    let p = LinearRegression::seeded(2, 2, 1, 0.5, 3);
    for seed in 0..10 {
        assert!(gradient_check(&p, &random_point(&p, seed), 1e-5).unwrap() < 1e-8);
    }
}

#[test]
fn least_squares_solution_is_stationary() {
    let p = LinearRegression::seeded(30, 4, 2, 0.2, 5);
    // least squares through the QR of X
    let (q, r) = deft_core::linalg::qr_real(&p.x).unwrap();
    let rhs = q.tr_matmul(&p.y).unwrap();
    let mut w = RealMatrix::zeros(4, 2);
    for c in 0..2 {
        for i in (0..4).rev() {
            let mut acc = rhs[(i, c)];
            for j in i + 1..4 {
                acc -= r[(i, j)] * w[(j, c)];
            }
            w[(i, c)] = acc / r[(i, i)];
        }
    }
    let (_, g) = p.loss_and_grad(&[w]).unwrap();
    assert!(g[0].max_abs() < 1e-10);
}

#[test]
fn well_separated_blobs_are_perfectly_classified_by_nearest_centroid() {
    let d = make_blobs(21, 400, 16, 4, 20.0, 1.0).unwrap();
    for i in 0..400 {
        let x = d.inputs.row(i);
        let nearest = (0..4)
            .min_by(|&a, &b| {
                let da: f64 = d.centers.row(a).iter().zip(x).map(|(c, v)| (c - v).powi(2)).sum();
                let db: f64 = d.centers.row(b).iter().zip(x).map(|(c, v)| (c - v).powi(2)).sum();
                da.total_cmp(&db)
            })
            .unwrap();
        assert_eq!(nearest, d.labels[i]);
    }
}

#[test]
fn dense_adamw_fits_the_blobs() {
    let data = make_blobs(0, 512, 16, 4, 3.0, 1.0).unwrap();
    let dense = ProjectionConfig {
        method: Method::Identity,
        ..Default::default()
    };
    let adamw = AdamWConfig {
        learning_rate: 3e-3,
        ..Default::default()
    };
    let mut t = Trainer::new(Box::new(MlpBlobs { data, hidden: 32 }), &dense, RankPolicy::Full, adamw, 0).unwrap();
    let first = t.step().unwrap().loss;
    assert!((first - 4f64.ln()).abs() < 0.5);
    for _ in 1..500 {
        t.step().unwrap();
    }
    assert!(t.loss().unwrap() < 0.2 * 4f64.ln());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn losses_are_non_negative(seed in any::<u64>(), scale in 0.0f64..5.0) {
        for p in problems() {
            let point: Vec<RealMatrix> = random_point(p.as_ref(), seed % 1000).into_iter().map(|m| m.scaled(scale)).collect();
            prop_assert!(p.loss(&point).unwrap() >= 0.0);
        }
    }

    #[test]
    fn bowl_loss_vanishes_only_at_the_target(seed in any::<u64>(), eps in 1e-6f64..1.0) {
        let p = QuadraticBowl::seeded(3, 4, seed);
        prop_assert_eq!(p.loss(std::slice::from_ref(&p.target)).unwrap(), 0.0);
        let mut off = p.target.clone();
        off[(seed as usize % 3, 0)] += eps;
        prop_assert!(p.loss(&[off]).unwrap() > 0.0);
    }

    #[test]
    fn blob_generation_is_pure(seed in any::<u64>(), n in 2usize..60, c in 2usize..5) {
        let n = n.max(c);
        let a = make_blobs(seed, n, 3, c, 2.0, 0.5).unwrap();
        let b = make_blobs(seed, n, 3, c, 2.0, 0.5).unwrap();
        prop_assert_eq!(&a, &b);
        let counts: Vec<usize> = (0..c).map(|k| a.labels.iter().filter(|&&y| y == k).count()).collect();
        prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }
}
