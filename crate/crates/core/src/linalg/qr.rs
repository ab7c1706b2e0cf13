//! Householder QR for real and complex matrices.
//!
//! Both variants return the economy factorization and normalize the sign (or
//! phase) of `R`'s diagonal to be real and non-negative, so the factors are a
//! deterministic function of the input. A column that is already zero below
//! the diagonal gets no reflector; its `R` diagonal is zero and the matching
//! `Q` column is completed from the identity by the earlier reflectors.

use num_complex::Complex64;

use super::matrix::{axpy, ComplexMatrix, RealMatrix};
use crate::error::{Error, Result};

/// Economy QR of an `m×q` real matrix: `Q` is `m×q'`, `R` is `q'×q`, `q' = min(m, q)`.
pub fn qr_real(a: &RealMatrix) -> Result<(RealMatrix, RealMatrix)> {
    a.check_finite("qr input")?;
    let (m, q) = a.shape();
    let p = m.min(q);
    let mut work = a.clone();
    let mut reflectors: Vec<Option<(Vec<f64>, f64)>> = Vec::with_capacity(p);
    let mut w = vec![0.0; q];

    for j in 0..p {
        let x: Vec<f64> = (j..m).map(|i| work[(i, j)]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        // vᵀv = 2·norm·(norm + |x₀|) > 0 since alpha carries the opposite sign of x₀
        let beta = 2.0 / v.iter().map(|t| t * t).sum::<f64>();

        let w = &mut w[j + 1..];
        w.iter_mut().for_each(|t| *t = 0.0);
        for (vi, i) in v.iter().zip(j..m) {
            axpy(*vi, &work.row(i)[j + 1..], w);
        }
        for (vi, i) in v.iter().zip(j..m) {
            axpy(-beta * vi, w, &mut work.row_mut(i)[j + 1..]);
        }
        work[(j, j)] = alpha;
        for i in j + 1..m {
            work[(i, j)] = 0.0;
        }
        reflectors.push(Some((v, beta)));
    }

    let mut r = RealMatrix::from_fn(p, q, |i, j| if j >= i { work[(i, j)] } else { 0.0 });

    let mut qm = RealMatrix::zeros(m, p);
    for i in 0..p {
        qm[(i, i)] = 1.0;
    }
    let mut acc = vec![0.0; p];
    for (j, refl) in reflectors.iter().enumerate().rev() {
        let Some((v, beta)) = refl else { continue };
        let acc = &mut acc[j..];
        acc.iter_mut().for_each(|t| *t = 0.0);
        for (vi, i) in v.iter().zip(j..m) {
            axpy(*vi, &qm.row(i)[j..], acc);
        }
        for (vi, i) in v.iter().zip(j..m) {
            axpy(-beta * vi, acc, &mut qm.row_mut(i)[j..]);
        }
    }

    for j in 0..p {
        if r[(j, j)] < 0.0 {
            r.row_mut(j).iter_mut().for_each(|t| *t = -*t);
            for i in 0..m {
                qm[(i, j)] = -qm[(i, j)];
            }
        }
    }
    Ok((qm, r))
}

/// QR of an `m×k` complex matrix with `k ≤ m`: `Q` is `m×k` with orthonormal columns,
/// `R` is `k×k` upper triangular with a real non-negative diagonal.
pub fn qr_complex(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let (m, k) = a.shape();
    if k > m {
        return Err(Error::ShapeMismatch(format!(
            "complex QR needs at least as many rows as columns, got {m}x{k}"
        )));
    }
    let zero = Complex64::new(0.0, 0.0);
    let mut work = a.clone();
    let mut reflectors: Vec<Option<(Vec<Complex64>, f64)>> = Vec::with_capacity(k);
    let mut w = vec![zero; k];

    for j in 0..k {
        let x: Vec<Complex64> = (j..m).map(|i| work[(i, j)]).collect();
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            reflectors.push(None);
            continue;
        }
        let x0_abs = x[0].norm();
        let phase = if x0_abs == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            x[0] / x0_abs
        };
        let alpha = -phase * norm;
        let mut v = x;
        v[0] -= alpha;
        let beta = 2.0 / v.iter().map(|z| z.norm_sqr()).sum::<f64>();

        let w = &mut w[j + 1..];
        w.iter_mut().for_each(|t| *t = zero);
        for (vi, i) in v.iter().zip(j..m) {
            let c = vi.conj();
            for (t, &a) in w.iter_mut().zip(&work.row(i)[j + 1..]) {
                *t += c * a;
            }
        }
        for (vi, i) in v.iter().zip(j..m) {
            let c = *vi * beta;
            for (a, &t) in work.row_mut(i)[j + 1..].iter_mut().zip(w.iter()) {
                *a -= c * t;
            }
        }
        work[(j, j)] = alpha;
        for i in j + 1..m {
            work[(i, j)] = zero;
        }
        reflectors.push(Some((v, beta)));
    }

    let mut r = ComplexMatrix::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            r[(i, j)] = work[(i, j)];
        }
    }

    let mut qm = ComplexMatrix::zeros(m, k);
    for i in 0..k {
        qm[(i, i)] = Complex64::new(1.0, 0.0);
    }
    let mut acc = vec![zero; k];
    for (j, refl) in reflectors.iter().enumerate().rev() {
        let Some((v, beta)) = refl else { continue };
        let acc = &mut acc[j..];
        acc.iter_mut().for_each(|t| *t = zero);
        for (vi, i) in v.iter().zip(j..m) {
            let c = vi.conj();
            for (t, &q) in acc.iter_mut().zip(&qm.row(i)[j..]) {
                *t += c * q;
            }
        }
        for (vi, i) in v.iter().zip(j..m) {
            let c = *vi * *beta;
            for (q, &t) in qm.row_mut(i)[j..].iter_mut().zip(acc.iter()) {
                *q -= c * t;
            }
        }
    }

    for j in 0..k {
        let d = r[(j, j)];
        let mag = d.norm();
        if mag == 0.0 {
            r[(j, j)] = zero;
            continue;
        }
        let phase = d / mag;
        if phase == Complex64::new(1.0, 0.0) {
            r[(j, j)] = Complex64::new(mag, 0.0);
            continue;
        }
        let conj = phase.conj();
        for l in j..k {
            r[(j, l)] *= conj;
        }
        r[(j, j)] = Complex64::new(mag, 0.0);
        for i in 0..m {
            qm[(i, j)] *= phase;
        }
    }
    Ok((qm, r))
}
