//! Deterministic energy-based Fourier projection.
//!
//! The gradient's rows are transformed to the frequency domain, the `k`
//! frequency bins with the most energy are kept as a complex sketch of the
//! column space, and that sketch is orthonormalized first over ℂ and then,
//! after splitting real and imaginary parts, over ℝ.

use num_complex::Complex64;

use super::{check_rank, Method, ProjectorBasis, SketchLayout};
use crate::error::{Error, Result};
use crate::linalg::{fft_rows, qr_complex, qr_real, ComplexMatrix, RealMatrix};

/// Sketch columns whose residual against earlier ones falls below this are
/// treated as linearly dependent. The expanded sketch has unit-scale columns,
/// so the threshold is absolute.
const DEPENDENT_COLUMN_TOL: f64 = 1e-7;

/// `s_j = Σ_i |Gf(i, j)|²`.
pub fn energy_spectrum(gf: &ComplexMatrix) -> Vec<f64> {
    let mut s = vec![0.0; gf.cols()];
    for i in 0..gf.rows() {
        for (acc, z) in s.iter_mut().zip(gf.row(i)) {
            *acc += z.norm_sqr();
        }
    }
    s
}

/// Indices of the `k` largest scores, ties going to the lower index, returned ascending.
pub fn select_top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} of {} frequencies",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut picked = order[..k].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Per-frequency energies and the selected top-`k` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySelection {
    pub scores: Vec<f64>,
    pub indices: Vec<usize>,
}

impl FrequencySelection {
    pub fn from_spectrum(gf: &ComplexMatrix, k: usize) -> Result<Self> {
        let scores = energy_spectrum(gf);
        let indices = select_top_k(&scores, k)?;
        Ok(Self { scores, indices })
    }
}

/// Splits an `m×k` complex matrix into an `m×2k` real one.
pub fn real_imag_expand(q: &ComplexMatrix, layout: SketchLayout) -> RealMatrix {
    let (m, k) = q.shape();
    RealMatrix::from_fn(m, 2 * k, |i, j| {
        let (col, imag) = match layout {
            SketchLayout::Interleaved => (j / 2, j % 2 == 1),
            SketchLayout::Block => (j % k, j >= k),
        };
        let z: Complex64 = q[(i, col)];
        if imag {
            z.im
        } else {
            z.re
        }
    })
}

/// Rank-`k` orthonormal basis (`m×k`) for the column space of `g`.
///
/// The expanded real sketch is scanned in order and a column is kept when its
/// component orthogonal to the kept ones exceeds [`DEPENDENT_COLUMN_TOL`].
/// When fewer than `k` columns survive, standard basis vectors fill the rest.
pub fn deft_build(g: &RealMatrix, k: usize, layout: SketchLayout) -> Result<ProjectorBasis> {
    check_rank(g, k)?;
    let gf = fft_rows(g)?;
    let selection = FrequencySelection::from_spectrum(&gf, k)?;
    let sketch = gf.select_columns(&selection.indices);
    let (qc, _) = qr_complex(&sketch)?;
    let expanded = real_imag_expand(&qc, layout);

    let m = g.rows();
    let candidates = (0..expanded.cols())
        .map(|j| expanded.column(j))
        .chain((0..m).map(|i| unit(m, i)));
    let picked = independent_columns(candidates, k);
    let chosen = RealMatrix::from_fn(m, k, |i, j| picked[j][i]);
    let (q, _) = qr_real(&chosen)?;
    Ok(ProjectorBasis::left(q, Method::Deft))
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; m];
    e[i] = 1.0;
    e
}

/// First `k` candidates independent of those already taken, judged by the
/// twice-orthogonalized residual norm.
fn independent_columns(candidates: impl Iterator<Item = Vec<f64>>, k: usize) -> Vec<Vec<f64>> {
    let mut taken = Vec::with_capacity(k);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    for col in candidates {
        if taken.len() == k {
            break;
        }
        let mut r = col.clone();
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = q.iter().zip(&r).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > DEPENDENT_COLUMN_TOL {
            r.iter_mut().for_each(|x| *x /= norm);
            basis.push(r);
            taken.push(col);
        }
    }
    taken
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projector::projection_error;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn energy_examples() {
        let gf = ComplexMatrix::from_rows(&[[c(3.0, 0.0), c(-1.0, 0.0)], [c(7.0, 0.0), c(-1.0, 0.0)]]).unwrap();
        assert_eq!(energy_spectrum(&gf), vec![58.0, 2.0]);
        assert_eq!(energy_spectrum(&ComplexMatrix::zeros(3, 4)), vec![0.0; 4]);
        let one = ComplexMatrix::from_rows(&[[c(1.0, 1.0)]]).unwrap();
        assert_eq!(energy_spectrum(&one), vec![2.0]);
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(select_top_k(&[58.0, 2.0], 1).unwrap(), vec![0]);
        assert_eq!(select_top_k(&[5.0, 5.0, 3.0], 2).unwrap(), vec![0, 1]);
        assert_eq!(select_top_k(&[1.0, 3.0, 2.0], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(select_top_k(&[1.0, 3.0, 2.0, 3.0], 2).unwrap(), vec![1, 3]);
        assert!(select_top_k(&[1.0], 2).is_err());
        assert!(select_top_k(&[1.0], 0).is_err());
    }

    #[test]
    fn hand_traced_examples() {
        let g = RealMatrix::from_rows(&[[2.0, 0.0], [0.0, 0.0]]).unwrap();
        let p = deft_build(&g, 1, SketchLayout::Interleaved).unwrap();
        assert_eq!(p.basis, RealMatrix::from_rows(&[[1.0], [0.0]]).unwrap());
        assert_eq!(projection_error(&g, &p).unwrap(), 0.0);

        let p = deft_build(&RealMatrix::identity(2), 1, SketchLayout::Interleaved).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(p.basis.max_abs_diff(&RealMatrix::from_rows(&[[h], [h]]).unwrap()) < 1e-15);
    }

    #[test]
    fn layouts_split_as_documented() {
        let q = ComplexMatrix::from_rows(&[[c(1.0, 2.0), c(3.0, 4.0)]]).unwrap();
        let inter = real_imag_expand(&q, SketchLayout::Interleaved);
        assert_eq!(inter.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        let block = real_imag_expand(&q, SketchLayout::Block);
        assert_eq!(block.as_slice(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn rank_out_of_range_is_rejected() {
        let g = RealMatrix::seeded_gaussian(4, 3, 1);
        assert!(deft_build(&g, 4, SketchLayout::Interleaved).is_err());
        assert!(deft_build(&g, 0, SketchLayout::Interleaved).is_err());
        // 2k > m still works while k <= min(m, n)
        let p = deft_build(&g, 3, SketchLayout::Interleaved).unwrap();
        assert_eq!(p.basis.shape(), (4, 3));
        assert!(p.basis.orthonormality_defect() < 1e-12);
    }

    #[test]
    fn seeded_square_is_orthonormal_and_deterministic() {
        let g = RealMatrix::seeded_gaussian(16, 16, 42);
        for layout in [SketchLayout::Interleaved, SketchLayout::Block] {
            let a = deft_build(&g, 4, layout).unwrap();
            let b = deft_build(&g, 4, layout).unwrap();
            assert!(a.basis.orthonormality_defect() < 1e-12);
            assert_eq!(a, b);
        }
    }
}
