//! Thin SVD by Householder bidiagonalization followed by implicit-shift
//! Golub–Kahan QR sweeps on the bidiagonal.
//!
//! Singular vectors are accumulated transposed (one vector per contiguous row)
//! so every Givens rotation touches two contiguous slices.

use super::matrix::{axpy, dot, RealMatrix};
use crate::error::{Error, Result};

/// `A = U·diag(S)·Vᵀ` with `p = min(m, n)` singular triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// `m×p`, orthonormal columns.
    pub u: RealMatrix,
    /// Non-increasing, non-negative.
    pub s: Vec<f64>,
    /// `n×p`, orthonormal columns.
    pub v: RealMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> RealMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (x, s) in us.row_mut(i).iter_mut().zip(&self.s) {
                *x *= s;
            }
        }
        us.matmul_tr(&self.v).expect("conformable factors")
    }
}

/// Full thin SVD. In each column of `U` the entry of largest magnitude is
/// non-negative (first such entry on ties) and `V` is adjusted to match.
pub fn svd(a: &RealMatrix) -> Result<SvdResult> {
    a.check_finite("svd input")?;
    let (m, n) = a.shape();
    if m >= n {
        let f = tall_svd(a, true, true)?;
        let (mut u, mut v) = (f.ut.expect("requested"), f.vt.expect("requested"));
        apply_sign_convention(&mut u, Some(&mut v));
        Ok(SvdResult {
            u: u.transpose(),
            s: f.s,
            v: v.transpose(),
        })
    } else {
        let f = tall_svd(&a.transpose(), true, true)?;
        // Aᵀ = U'SV'ᵀ  ⇒  A = V'SU'ᵀ
        let (mut u, mut v) = (f.vt.expect("requested"), f.ut.expect("requested"));
        apply_sign_convention(&mut u, Some(&mut v));
        Ok(SvdResult {
            u: u.transpose(),
            s: f.s,
            v: v.transpose(),
        })
    }
}

/// Left singular vectors and singular values only; identical to the `u`/`s`
/// of [`svd`] but skips accumulating the right vectors when possible.
pub fn svd_left(a: &RealMatrix) -> Result<(RealMatrix, Vec<f64>)> {
    a.check_finite("svd input")?;
    let (m, n) = a.shape();
    let (mut u, s) = if m >= n {
        let f = tall_svd(a, true, false)?;
        (f.ut.expect("requested"), f.s)
    } else {
        let f = tall_svd(&a.transpose(), false, true)?;
        (f.vt.expect("requested"), f.s)
    };
    apply_sign_convention(&mut u, None);
    Ok((u.transpose(), s))
}

struct TallFactors {
    /// `n×m`, row i = i-th left singular vector
    ut: Option<RealMatrix>,
    s: Vec<f64>,
    /// `n×n`, row i = i-th right singular vector
    vt: Option<RealMatrix>,
}

/// Rows of `ut` are singular vectors; flip each so its largest-magnitude entry is non-negative.
fn apply_sign_convention(ut: &mut RealMatrix, mut vt: Option<&mut RealMatrix>) {
    for i in 0..ut.rows() {
        let row = ut.row(i);
        let mut best = 0;
        for (j, x) in row.iter().enumerate() {
            if x.abs() > row[best].abs() {
                best = j;
            }
        }
        if row[best] < 0.0 {
            ut.row_mut(i).iter_mut().for_each(|x| *x = -*x);
            if let Some(vt) = vt.as_deref_mut() {
                vt.row_mut(i).iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
}

struct Householder {
    v: Vec<f64>,
    beta: f64,
}

/// Reflector `H = I − beta·v·vᵀ` with `H·x = alpha·e₁`; `None` when `x = 0`.
fn householder(x: Vec<f64>) -> (Option<Householder>, f64) {
    let norm = x.iter().map(|t| t * t).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (None, 0.0);
    }
    let alpha = if x[0] >= 0.0 { -norm } else { norm };
    let mut v = x;
    v[0] -= alpha;
    let beta = 2.0 / v.iter().map(|t| t * t).sum::<f64>();
    (Some(Householder { v, beta }), alpha)
}

fn tall_svd(a: &RealMatrix, want_u: bool, want_v: bool) -> Result<TallFactors> {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut work = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut left: Vec<Option<Householder>> = Vec::with_capacity(n);
    let mut right: Vec<Option<Householder>> = Vec::with_capacity(n);
    let mut w = vec![0.0; n];

    for j in 0..n {
        let x: Vec<f64> = (j..m).map(|i| work[(i, j)]).collect();
        let (h, alpha) = householder(x);
        d[j] = alpha;
        let w = &mut w[j + 1..];
        if let Some(h) = &h {
            w.iter_mut().for_each(|t| *t = 0.0);
            for (vi, i) in h.v.iter().zip(j..m) {
                axpy(*vi, &work.row(i)[j + 1..], w);
            }
            axpy(-h.beta * h.v[0], w, &mut work.row_mut(j)[j + 1..]);
        }
        left.push(h);

        // right reflector from the freshly updated row j
        let rh = if j + 2 < n {
            let (rh, alpha_r) = householder(work.row(j)[j + 1..].to_vec());
            e[j] = alpha_r;
            rh
        } else {
            if j + 1 < n {
                e[j] = work[(j, j + 1)];
            }
            None
        };

        // fused pass: finish the left update of each remaining row, then the right update
        for i in j + 1..m {
            let row = &mut work.row_mut(i)[j + 1..];
            if let Some(h) = &left[j] {
                axpy(-h.beta * h.v[i - j], w, row);
            }
            if let Some(r) = &rh {
                let s = dot(row, &r.v);
                axpy(-r.beta * s, &r.v, row);
            }
        }
        right.push(rh);
    }

    let ut = if want_u {
        // U = H₀⋯H_{n−1}·E accumulated backwards into an m×n matrix
        let mut u = RealMatrix::zeros(m, n);
        for i in 0..n {
            u[(i, i)] = 1.0;
        }
        let mut acc = vec![0.0; n];
        for (j, h) in left.iter().enumerate().rev() {
            let Some(h) = h else { continue };
            let acc = &mut acc[j..];
            acc.iter_mut().for_each(|t| *t = 0.0);
            for (vi, i) in h.v.iter().zip(j..m) {
                axpy(*vi, &u.row(i)[j..], acc);
            }
            for (vi, i) in h.v.iter().zip(j..m) {
                axpy(-h.beta * vi, acc, &mut u.row_mut(i)[j..]);
            }
        }
        Some(u.transpose())
    } else {
        None
    };

    let vt = if want_v {
        let mut v = RealMatrix::identity(n);
        let mut acc = vec![0.0; n];
        for (j, h) in right.iter().enumerate().rev() {
            let Some(h) = h else { continue };
            let lo = j + 1;
            let acc = &mut acc[lo..];
            acc.iter_mut().for_each(|t| *t = 0.0);
            for (vi, i) in h.v.iter().zip(lo..n) {
                axpy(*vi, &v.row(i)[lo..], acc);
            }
            for (vi, i) in h.v.iter().zip(lo..n) {
                axpy(-h.beta * vi, acc, &mut v.row_mut(i)[lo..]);
            }
        }
        Some(v.transpose())
    } else {
        None
    };

    let mut bd = Bidiagonal { d, e, ut, vt };
    bd.diagonalize()?;
    Ok(bd.finish())
}

struct Bidiagonal {
    d: Vec<f64>,
    e: Vec<f64>,
    ut: Option<RealMatrix>,
    vt: Option<RealMatrix>,
}

#[inline]
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / r, b / r, r)
    }
}

/// `row_i ← c·row_i + s·row_j`, `row_j ← −s·row_i + c·row_j`.
#[inline]
fn rotate_rows(m: &mut Option<RealMatrix>, i: usize, j: usize, c: f64, s: f64) {
    let Some(m) = m else { return };
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    let (head, tail) = data.split_at_mut(hi * cols);
    let a = &mut head[lo * cols..(lo + 1) * cols];
    let b = &mut tail[..cols];
    let (ri, rj) = if i < j { (a, b) } else { (b, a) };
    for (x, y) in ri.iter_mut().zip(rj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi + s * yj;
        *y = c * yj - s * xi;
    }
}

impl Bidiagonal {
    fn diagonalize(&mut self) -> Result<()> {
        let n = self.d.len();
        if n < 2 {
            return Ok(());
        }
        let eps = f64::EPSILON;
        let anorm = (0..n)
            .map(|i| self.d[i].abs() + if i + 1 < n { self.e[i].abs() } else { 0.0 })
            .fold(0.0, f64::max);
        let max_iter = 100 * n.max(10);
        let mut iter = 0;

        loop {
            for i in 0..n - 1 {
                if self.e[i].abs() <= eps * (self.d[i].abs() + self.d[i + 1].abs()) {
                    self.e[i] = 0.0;
                }
            }
            for di in self.d.iter_mut() {
                if di.abs() <= eps * anorm {
                    *di = 0.0;
                }
            }
            let mut q = n - 1;
            while q > 0 && self.e[q - 1] == 0.0 {
                q -= 1;
            }
            if q == 0 {
                return Ok(());
            }
            let mut p = q - 1;
            while p > 0 && self.e[p - 1] != 0.0 {
                p -= 1;
            }
            iter += 1;
            if iter > max_iter {
                return Err(Error::NoConvergence(max_iter));
            }
            if let Some(i) = (p..q).find(|&i| self.d[i] == 0.0) {
                self.chase_row(i, q);
            } else if self.d[q] == 0.0 {
                self.chase_column(p, q);
            } else {
                self.qr_sweep(p, q);
            }
        }
    }

    /// `d[i] = 0` with `i < q`: rotate `e[i]` out along row `i` with left rotations.
    fn chase_row(&mut self, i: usize, q: usize) {
        let mut f = self.e[i];
        self.e[i] = 0.0;
        for j in i + 1..=q {
            let (c, s, r) = givens(self.d[j], f);
            self.d[j] = r;
            rotate_rows(&mut self.ut, j, i, c, s);
            if j < q {
                f = -s * self.e[j];
                self.e[j] *= c;
            }
        }
    }

    /// `d[q] = 0`: rotate `e[q−1]` up along column `q` with right rotations.
    fn chase_column(&mut self, p: usize, q: usize) {
        let mut f = self.e[q - 1];
        self.e[q - 1] = 0.0;
        for j in (p..q).rev() {
            let (c, s, r) = givens(self.d[j], f);
            self.d[j] = r;
            rotate_rows(&mut self.vt, j, q, c, s);
            if j > p {
                f = -s * self.e[j - 1];
                self.e[j - 1] *= c;
            }
        }
    }

    /// One implicit-shift bulge-chasing sweep over the unreduced block `p..=q`.
    fn qr_sweep(&mut self, p: usize, q: usize) {
        let (d, e) = (&mut self.d, &mut self.e);
        let dm = d[q - 1];
        let dq = d[q];
        let em = e[q - 1];
        let el = if q - 1 > p { e[q - 2] } else { 0.0 };
        let t11 = dm * dm + el * el;
        let t12 = dm * em;
        let t22 = dq * dq + em * em;
        // Wilkinson shift: eigenvalue of the trailing 2×2 of BᵀB closer to t22
        let mu = if t12 == 0.0 {
            t22
        } else {
            let delta = 0.5 * (t11 - t22);
            let sign = if delta >= 0.0 { 1.0 } else { -1.0 };
            t22 - t12 * t12 / (delta + sign * delta.hypot(t12))
        };

        let mut y = d[p] * d[p] - mu;
        let mut z = d[p] * e[p];
        for k in p..q {
            let (c, s, r) = givens(y, z);
            if k > p {
                e[k - 1] = r;
            }
            y = c * d[k] + s * e[k];
            e[k] = c * e[k] - s * d[k];
            z = s * d[k + 1];
            d[k + 1] *= c;
            rotate_rows(&mut self.vt, k, k + 1, c, s);

            let (c, s, r) = givens(y, z);
            d[k] = r;
            y = c * e[k] + s * d[k + 1];
            d[k + 1] = c * d[k + 1] - s * e[k];
            if k + 1 < q {
                z = s * e[k + 1];
                e[k + 1] *= c;
            }
            rotate_rows(&mut self.ut, k, k + 1, c, s);
        }
        e[q - 1] = y;
    }

    fn finish(mut self) -> TallFactors {
        let n = self.d.len();
        for i in 0..n {
            if self.d[i] < 0.0 {
                self.d[i] = -self.d[i];
                if let Some(vt) = self.vt.as_mut() {
                    vt.row_mut(i).iter_mut().for_each(|x| *x = -*x);
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.d[b].total_cmp(&self.d[a]).then(a.cmp(&b)));
        let permute = |m: RealMatrix| {
            let cols = m.cols();
            let mut data = Vec::with_capacity(n * cols);
            for &i in &order {
                data.extend_from_slice(m.row(i));
            }
            RealMatrix::from_vec_unchecked(n, cols, data)
        };
        TallFactors {
            s: order.iter().map(|&i| self.d[i]).collect(),
            ut: self.ut.map(permute),
            vt: self.vt.map(permute),
        }
    }
}
