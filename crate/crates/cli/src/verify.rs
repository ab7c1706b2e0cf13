//! `deft verify`: every invariant of the kernels, projectors, optimizer and
//! model zoo, evaluated on seeded inputs and reported with its worst case.

use std::cell::Cell;
use std::fmt::Write as _;
use std::time::Instant;

use deft_core::linalg::{fft_rows, naive_dft, qr_real, svd};
use deft_core::optim::dense_adamw_step;
use deft_core::projector::{deft_build, energy_spectrum, projection_error, svd_build};
use deft_core::zoo::{gradient_check, make_blobs, LinearRegression, MlpBlobs, Problem, QuadraticBowl};
use deft_core::{AdamWConfig, Method, ParamState, ProjectionConfig, RealMatrix, SketchLayout};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub type QrResult = deft_core::Result<(RealMatrix, RealMatrix)>;

/// Size of the seeded matrix corpus.
pub const CORPUS_SIZE: usize = 100;
/// Largest transform length checked against the direct DFT.
pub const FFT_MAX_LEN: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    /// Acceptance criterion the property belongs to.
    pub criterion: u8,
    pub cases: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    /// Pass iff `worst <= tolerance`.
    pub tolerance: f64,
    pub passed: bool,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn get(&self, name: &str) -> Option<&PropertyResult> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.properties.iter().filter(|p| !p.passed).map(|p| p.name.as_str()).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for p in &self.properties {
            let _ = writeln!(
                s,
                "{}  {:<36} worst {:>10.3e}  tol {:>8.1e}  cases {:>5}  {:>7.3} s",
                if p.passed { "PASS" } else { "FAIL" },
                p.name,
                p.worst,
                p.tolerance,
                p.cases,
                p.seconds
            );
        }
        let failed = self.failures().len();
        let _ = writeln!(
            s,
            "{} of {} properties passed",
            self.properties.len() - failed,
            self.properties.len()
        );
        s
    }
}

/// Seeded matrices of mixed shapes (1..=72 per side) and scales.
pub fn corpus() -> Vec<RealMatrix> {
    (0..CORPUS_SIZE)
        .map(|i| {
            let m = 1 + (i * 37 + 5) % 72;
            let n = 1 + (i * 53 + 11) % 72;
            let scale = 10f64.powi((i % 7) as i32 - 3);
            RealMatrix::seeded_gaussian(m, n, 1000 + i as u64).scaled(scale)
        })
        .collect()
}

/// QR that negates the first column of Q and row of R on every other call.
/// Products are unchanged; results are not reproducible.
#[derive(Debug, Default)]
pub struct SignFlippingQr {
    calls: Cell<usize>,
}

impl SignFlippingQr {
    pub fn qr(&self, a: &RealMatrix) -> QrResult {
        let (mut q, mut r) = qr_real(a)?;
        let n = self.calls.get();
        self.calls.set(n + 1);
        if n % 2 == 1 {
            for i in 0..q.rows() {
                q[(i, 0)] = -q[(i, 0)];
            }
            for j in 0..r.cols() {
                r[(0, j)] = -r[(0, j)];
            }
        }
        Ok((q, r))
    }
}

/// Runs the suite with the library QR.
pub fn run_verify() -> VerifyReport {
    run_verify_with(&qr_real)
}

/// Runs the suite with `qr` standing in for the QR kernel in the QR properties.
pub fn run_verify_with(qr: &dyn Fn(&RealMatrix) -> QrResult) -> VerifyReport {
    let corpus = corpus();
    let mut props = Vec::new();
    let mut check = |name: &str, criterion: u8, tolerance: f64, f: &mut dyn FnMut() -> (usize, f64)| {
        let t = Instant::now();
        let (cases, worst) = f();
        props.push(PropertyResult {
            name: name.into(),
            criterion,
            cases,
            worst,
            tolerance,
            passed: worst <= tolerance,
            seconds: t.elapsed().as_secs_f64(),
        });
    };

    check("fft_matches_direct_dft", 1, 1e-9, &mut || {
        let mut worst = 0.0f64;
        for n in 2..=FFT_MAX_LEN {
            let g = RealMatrix::seeded_gaussian(1, n, n as u64);
            let fast = fft_rows(&g).expect("finite input");
            let x: Vec<Complex64> = g.row(0).iter().map(|&v| Complex64::new(v, 0.0)).collect();
            for (a, b) in fast.row(0).iter().zip(naive_dft(&x)) {
                worst = worst.max(nan_max((a - b).norm()));
            }
        }
        (FFT_MAX_LEN - 1, worst)
    });

    let qrs: Vec<Option<(RealMatrix, RealMatrix)>> = corpus.iter().map(|a| qr(a).ok()).collect();
    check("qr_reconstruction", 1, 1e-10, &mut || {
        worst_over(corpus.iter().zip(&qrs), |(a, f)| match f {
            Some((q, r)) => rel_residual(&q.matmul(r).expect("conformable"), a),
            None => f64::INFINITY,
        })
    });
    check("qr_orthonormal_q", 1, 1e-10, &mut || {
        worst_over(&qrs, |f| f.as_ref().map_or(f64::INFINITY, |(q, _)| q.orthonormality_defect()))
    });
    check("qr_non_negative_diagonal", 1, 0.0, &mut || {
        worst_over(&qrs, |f| match f {
            Some((_, r)) => (0..r.rows().min(r.cols())).map(|i| (-r[(i, i)]).max(0.0)).fold(0.0, f64::max),
            None => f64::INFINITY,
        })
    });
    check("qr_determinism", 1, 0.0, &mut || {
        worst_over(&corpus, |a| match (qr(a), qr(a)) {
            (Ok((q1, r1)), Ok((q2, r2))) => bitwise_diff(&q1, &q2).max(bitwise_diff(&r1, &r2)),
            _ => f64::INFINITY,
        })
    });

    let svds: Vec<_> = corpus.iter().map(|a| svd(a).ok()).collect();
    check("svd_reconstruction", 1, 1e-10, &mut || {
        worst_over(corpus.iter().zip(&svds), |(a, f)| {
            f.as_ref().map_or(f64::INFINITY, |f| rel_residual(&f.reconstruct(), a))
        })
    });
    check("svd_orthonormal_factors", 1, 1e-10, &mut || {
        worst_over(&svds, |f| {
            f.as_ref()
                .map_or(f64::INFINITY, |f| f.u.orthonormality_defect().max(f.v.orthonormality_defect()))
        })
    });

    check("parseval_energy", 2, 1e-10, &mut || {
        worst_over(&corpus, |g| {
            let total: f64 = energy_spectrum(&fft_rows(g).expect("finite input")).iter().sum();
            let expected = g.cols() as f64 * g.frobenius_norm_sq();
            nan_max((total - expected).abs() / expected)
        })
    });

    let builds = |g: &RealMatrix| -> Vec<ProjectionConfig> {
        let full = g.rows().min(g.cols());
        let mut ks = vec![1, (full / 2).max(1), full];
        ks.dedup();
        let mut out = Vec::new();
        for method in Method::ALL {
            for &k in &ks {
                out.push(ProjectionConfig {
                    method,
                    rank: k,
                    rsvd_oversampling: 8.min(full - k),
                    rsvd_seed: 7,
                    ..Default::default()
                });
            }
        }
        out
    };
    check("projector_orthonormality", 3, 1e-10, &mut || {
        let mut cases = 0;
        let mut worst = 0.0f64;
        for g in &corpus {
            for cfg in builds(g) {
                cases += 1;
                worst = worst.max(cfg.build(g, 0).map_or(f64::INFINITY, |p| nan_max(p.basis.orthonormality_defect())));
            }
        }
        (cases, worst)
    });
    check("projector_determinism", 3, 0.0, &mut || {
        let mut cases = 0;
        let mut worst = 0.0f64;
        for g in &corpus {
            for cfg in builds(g) {
                cases += 1;
                worst = worst.max(match (cfg.build(g, 3), cfg.build(g, 3)) {
                    (Ok(a), Ok(b)) => bitwise_diff(&a.basis, &b.basis),
                    _ => f64::INFINITY,
                });
            }
        }
        (cases, worst)
    });

    let ranks = |g: &RealMatrix| {
        let full = g.rows().min(g.cols());
        let mut ks: Vec<usize> = [1, 4, 16, full / 2].into_iter().filter(|&k| k >= 1 && k <= full).collect();
        ks.sort_unstable();
        ks.dedup();
        ks
    };
    let errors: Vec<(f64, f64, f64)> = corpus
        .iter()
        .flat_map(|g| {
            ranks(g).into_iter().map(move |k| {
                let deft = deft_build(g, k, SketchLayout::Interleaved).and_then(|p| projection_error(g, &p));
                let best = svd_build(g, k).and_then(|p| projection_error(g, &p));
                match (deft, best) {
                    (Ok(d), Ok(b)) => (d, b, g.frobenius_norm()),
                    _ => (f64::NAN, f64::NAN, f64::NAN),
                }
            })
        })
        .collect();
    check("deft_not_below_truncated_svd", 4, 1e-10, &mut || {
        (errors.len(), errors.iter().map(|&(d, b, _)| nan_max(b - d)).fold(f64::NEG_INFINITY, f64::max))
    });
    check("deft_error_within_gradient_norm", 4, 1e-12, &mut || {
        (errors.len(), errors.iter().map(|&(d, _, n)| nan_max((d - n) / n)).fold(f64::NEG_INFINITY, f64::max))
    });

    check("deft_recovers_low_rank", 5, 1e-8, &mut || {
        let mut cases = 0;
        let mut worst = 0.0f64;
        for r in [1usize, 2, 4] {
            for seed in 0..10u64 {
                let (m, n) = (12 + 7 * seed as usize, 40 - 2 * seed as usize);
                let a = RealMatrix::seeded_gaussian(m, r, 50 + seed);
                let b = RealMatrix::seeded_gaussian(n, r, 90 + seed);
                let g = a.matmul_tr(&b).expect("conformable");
                let s = svd(&g).map(|f| f.s).unwrap_or_default();
                let rank_ok = s.len() > r && s[r] < 1e-10 * s[0];
                for k in [2 * r, 2 * r + 3] {
                    cases += 1;
                    let e = deft_build(&g, k, SketchLayout::Interleaved)
                        .and_then(|p| projection_error(&g, &p))
                        .unwrap_or(f64::INFINITY);
                    worst = worst.max(if rank_ok { nan_max(e) } else { f64::INFINITY });
                }
            }
        }
        (cases, worst)
    });

    check("identity_projection_is_dense_adamw", 6, 1e-12, &mut || identity_equivalence(false));
    check("two_sided_identity_is_dense_adamw", 6, 1e-12, &mut || identity_equivalence(true));

    check("refresh_cadence", 7, 0.0, &mut || {
        let cfg = ProjectionConfig {
            rank: 3,
            update_interval: 50,
            ..Default::default()
        };
        let mut state = ParamState::new(RealMatrix::zeros(10, 8), cfg, adamw(1e-3, 0.0)).expect("valid");
        let mut misses = 0.0;
        for t in 0..200u64 {
            let g = RealMatrix::seeded_gaussian(10, 8, t);
            let rebuilt = state.step(&g).map(|r| r.projector_rebuilt).unwrap_or(false);
            if rebuilt != (t % 50 == 0) {
                misses += 1.0;
            }
        }
        (200, misses)
    });
    check("zero_gradient_decay", 7, 1e-12, &mut || {
        let (lr, wd) = (0.01, 0.5);
        let w0 = RealMatrix::seeded_gaussian(6, 4, 3);
        let cfg = ProjectionConfig {
            rank: 2,
            ..Default::default()
        };
        let mut state = ParamState::new(w0.clone(), cfg, adamw(lr, wd)).expect("valid");
        let zero = RealMatrix::zeros(6, 4);
        let mut worst = 0.0f64;
        for t in 1..=100 {
            if state.step(&zero).is_err() {
                return (t as usize, f64::INFINITY);
            }
            let expected = w0.scaled((1.0 - lr * wd).powi(t));
            worst = worst.max(rel_elementwise(state.weights(), &expected));
        }
        (100, worst)
    });
    check("update_scale_linearity", 7, 1e-15, &mut || {
        let base = ProjectionConfig {
            rank: 3,
            update_interval: 7,
            ..Default::default()
        };
        let w0 = RealMatrix::seeded_gaussian(9, 6, 5);
        let one = ParamState::new(w0.clone(), ProjectionConfig { scale: 0.75, ..base.clone() }, adamw(1e-2, 0.0));
        let two = ParamState::new(w0, ProjectionConfig { scale: 1.5, ..base }, adamw(1e-2, 0.0));
        let (Ok(mut one), Ok(mut two)) = (one, two) else {
            return (0, f64::INFINITY);
        };
        let mut worst = 0.0f64;
        for t in 0..30u64 {
            let g = RealMatrix::seeded_gaussian(9, 6, 500 + t);
            match (one.step_with_delta(&g), two.step_with_delta(&g)) {
                (Ok((_, d1)), Ok((_, d2))) => {
                    worst = worst.max(nan_max(d1.scaled(2.0).sub(&d2).expect("same shape").max_abs() / d2.max_abs()))
                }
                _ => return (t as usize, f64::INFINITY),
            }
        }
        (30, worst)
    });

    for problem in zoo_problems() {
        check(&format!("gradient_check_{}", problem.name()), 10, 1e-6, &mut || {
            let mut worst = 0.0f64;
            for seed in 0..10 {
                let point: Vec<RealMatrix> = problem
                    .shapes()
                    .into_iter()
                    .enumerate()
                    .map(|(i, (r, c))| RealMatrix::seeded_gaussian(r, c, seed * 31 + i as u64).scaled(0.7))
                    .collect();
                worst = worst.max(gradient_check(problem.as_ref(), &point, 1e-5).map_or(f64::INFINITY, nan_max));
            }
            (10, worst)
        });
    }

    let passed = props.iter().all(|p| p.passed);
    VerifyReport {
        passed,
        properties: props,
    }
}

pub fn zoo_problems() -> Vec<Box<dyn Problem>> {
    vec![
        Box::new(QuadraticBowl::seeded(6, 5, 11)),
        Box::new(LinearRegression::seeded(40, 6, 3, 0.3, 12)),
        Box::new(MlpBlobs {
            data: make_blobs(13, 64, 8, 4, 3.0, 1.0).expect("valid blob spec"),
            hidden: 10,
        }),
    ]
}

fn identity_equivalence(two_sided: bool) -> (usize, f64) {
    let mut worst = 0.0f64;
    let cfg = adamw(0.01, 0.1);
    for seed in 0..5u64 {
        let (m, n) = if seed % 2 == 0 { (7, 5) } else { (5, 7) };
        let proj = ProjectionConfig {
            method: Method::Identity,
            two_sided,
            ..Default::default()
        };
        let w0 = RealMatrix::seeded_gaussian(m, n, seed);
        let Ok(mut state) = ParamState::new(w0.clone(), proj, cfg) else {
            return (0, f64::INFINITY);
        };
        let (mut w, mut mo, mut v, mut t) = (w0, RealMatrix::zeros(m, n), RealMatrix::zeros(m, n), 0);
        for step in 0..100u64 {
            let g = RealMatrix::seeded_gaussian(m, n, seed * 1000 + step);
            if state.step(&g).is_err() || dense_adamw_step(&mut w, &mut mo, &mut v, &mut t, &g, &cfg).is_err() {
                return (0, f64::INFINITY);
            }
            worst = worst.max(nan_max(state.weights().max_abs_diff(&w)));
        }
    }
    (500, worst)
}

fn adamw(lr: f64, wd: f64) -> AdamWConfig {
    AdamWConfig {
        learning_rate: lr,
        weight_decay: wd,
        ..Default::default()
    }
}

fn worst_over<T>(items: impl IntoIterator<Item = T>, f: impl Fn(T) -> f64) -> (usize, f64) {
    items
        .into_iter()
        .fold((0, 0.0f64), |(n, w), x| (n + 1, w.max(nan_max(f(x)))))
}

/// NaN counts as the worst possible value.
fn nan_max(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

fn rel_residual(approx: &RealMatrix, exact: &RealMatrix) -> f64 {
    let norm = exact.frobenius_norm();
    let diff = approx.sub(exact).map_or(f64::INFINITY, |d| d.frobenius_norm());
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

fn rel_elementwise(a: &RealMatrix, b: &RealMatrix) -> f64 {
    a.zip_with(b, |x, y| (x - y).abs() / y.abs().max(1e-300))
        .map_or(f64::INFINITY, |d| nan_max(d.max_abs()))
}

/// 0 when the two matrices are bit-for-bit equal, else their largest difference.
fn bitwise_diff(a: &RealMatrix, b: &RealMatrix) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    if a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()) {
        0.0
    } else {
        a.max_abs_diff(b).max(f64::MIN_POSITIVE)
    }
}
