//! Baseline projectors: truncated SVD, randomized SVD, selected DCT columns, identity.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{check_rank, select_top_k, Method, ProjectorBasis};
use crate::error::{Error, Result};
use crate::linalg::{qr_real, seeded_rng, svd_left, FftPlan, RealMatrix};

/// Leading `k` left singular vectors of `g`.
pub fn svd_build(g: &RealMatrix, k: usize) -> Result<ProjectorBasis> {
    check_rank(g, k)?;
    let (u, _) = svd_left(g)?;
    Ok(ProjectorBasis::left(u.first_columns(k), Method::Svd))
}

/// Randomized range finder with one power iteration.
///
/// A seeded Gaussian test matrix with `k + oversampling` columns sketches the
/// range of `g`; the sketch basis is rotated onto the leading singular
/// directions of `Qᵀ·G` before truncating to `k` columns.
pub fn rsvd_build(g: &RealMatrix, k: usize, oversampling: usize, seed: u64) -> Result<ProjectorBasis> {
    check_rank(g, k)?;
    let (m, n) = g.shape();
    let width = k + oversampling;
    if width > m.min(n) {
        return Err(Error::InvalidRank {
            rank: width,
            rows: m,
            cols: n,
            constraint: "k + oversampling <= min(m, n)",
        });
    }
    let omega = RealMatrix::gaussian(n, width, &mut seeded_rng(seed));
    let (q, _) = qr_real(&g.matmul(&omega)?)?;
    let (z, _) = qr_real(&g.tr_matmul(&q)?)?;
    let (q, _) = qr_real(&g.matmul(&z)?)?;
    let small = q.tr_matmul(g)?;
    let (ub, _) = svd_left(&small)?;
    let basis = q.matmul(&ub.first_columns(k))?;
    Ok(ProjectorBasis::left(basis, Method::Rsvd))
}

/// `G·C` where `C` is the orthonormal DCT-II basis of length `n`:
/// `C(l, j) = s_j·cos(π(l + ½)j/n)`, `s_0 = √(1/n)`, `s_j = √(2/n)`.
pub fn dct_coefficients(g: &RealMatrix) -> RealMatrix {
    let (m, n) = g.shape();
    let plan = FftPlan::new(n);
    let s0 = (1.0 / n as f64).sqrt();
    let sj = (2.0 / n as f64).sqrt();
    let twiddle: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, -PI * j as f64 / (2.0 * n as f64)))
        .collect();
    let mut out = RealMatrix::zeros(m, n);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..m {
        let x = g.row(i);
        // even samples ascending, then odd samples descending
        for t in 0..n.div_ceil(2) {
            buf[t] = Complex64::new(x[2 * t], 0.0);
        }
        for t in 0..n / 2 {
            buf[n - 1 - t] = Complex64::new(x[2 * t + 1], 0.0);
        }
        plan.process(&mut buf);
        for (j, o) in out.row_mut(i).iter_mut().enumerate() {
            let scale = if j == 0 { s0 } else { sj };
            *o = scale * (twiddle[j] * buf[j]).re;
        }
    }
    out
}

/// QR-orthonormalized `G·C(:, 𝓘)` where `𝓘` holds the `k` DCT columns with most energy.
pub fn dct_build(g: &RealMatrix, k: usize) -> Result<ProjectorBasis> {
    check_rank(g, k)?;
    let coeffs = dct_coefficients(g);
    let mut scores = vec![0.0; coeffs.cols()];
    for i in 0..coeffs.rows() {
        for (s, x) in scores.iter_mut().zip(coeffs.row(i)) {
            *s += x * x;
        }
    }
    let picked = select_top_k(&scores, k)?;
    let (q, _) = qr_real(&coeffs.select_columns(&picked))?;
    Ok(ProjectorBasis::left(q.first_columns(k), Method::Dct))
}

/// `I_d`; the projected optimizer then reduces to dense AdamW.
pub fn identity_build(d: usize) -> ProjectorBasis {
    ProjectorBasis::left(RealMatrix::identity(d), Method::Identity)
}
