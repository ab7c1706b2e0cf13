//! Unnormalized forward discrete Fourier transforms.
//!
//! Power-of-two lengths go through an iterative radix-2 kernel. Other lengths
//! below [`DIRECT_CUTOFF`] use a tabulated direct sum; longer ones are reduced
//! to a power-of-two circular convolution with Bluestein's chirp-z trick.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, RealMatrix};
use crate::error::Result;

/// Non-power-of-two lengths shorter than this use the direct O(n²) sum.
pub const DIRECT_CUTOFF: usize = 64;

/// Reference DFT: `X_k = Σ_j x_j·e^{−2πi·jk/n}` by the direct double loop.
pub fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &xj)| {
                    // reduce jk mod n before forming the angle so large n stays accurate
                    let phase = ((j * k) % n) as f64 / n as f64;
                    xj * Complex64::from_polar(1.0, -2.0 * PI * phase)
                })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Kernel {
    Radix2 {
        twiddles: Vec<Complex64>,
        bitrev: Vec<usize>,
    },
    Direct {
        // roots[r] = e^{−2πi·r/n}
        roots: Vec<Complex64>,
    },
    Bluestein {
        inner: Box<FftPlan>,
        chirp: Vec<Complex64>,
        kernel_spectrum: Vec<Complex64>,
    },
}

/// Precomputed transform of a fixed length, reusable across many rows.
#[derive(Debug, Clone)]
pub struct FftPlan {
    len: usize,
    kernel: Kernel,
}

impl FftPlan {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "transform length must be positive");
        let kernel = if len.is_power_of_two() {
            let bits = len.trailing_zeros();
            let bitrev = (0..len)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect();
            let twiddles = (0..len / 2)
                .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
                .collect();
            Kernel::Radix2 { twiddles, bitrev }
        } else if len < DIRECT_CUTOFF {
            let roots = (0..len)
                .map(|r| Complex64::from_polar(1.0, -2.0 * PI * r as f64 / len as f64))
                .collect();
            Kernel::Direct { roots }
        } else {
            let m = (2 * len - 1).next_power_of_two();
            let two_n = 2 * len as u128;
            // chirp[k] = e^{−πi·k²/n}, with k² reduced mod 2n
            let chirp: Vec<Complex64> = (0..len)
                .map(|k| {
                    let k2 = (k as u128 * k as u128) % two_n;
                    Complex64::from_polar(1.0, -PI * k2 as f64 / len as f64)
                })
                .collect();
            let inner = FftPlan::new(m);
            let mut b = vec![Complex64::new(0.0, 0.0); m];
            b[0] = chirp[0].conj();
            for k in 1..len {
                b[k] = chirp[k].conj();
                b[m - k] = chirp[k].conj();
            }
            inner.process(&mut b);
            Kernel::Bluestein {
                inner: Box::new(inner),
                chirp,
                kernel_spectrum: b,
            }
        };
        Self { len, kernel }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place forward transform of `buf`, whose length must equal the plan length.
    pub fn process(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        match &self.kernel {
            Kernel::Radix2 { twiddles, bitrev } => radix2(buf, twiddles, bitrev),
            Kernel::Direct { roots } => {
                let n = self.len;
                let input = buf.to_vec();
                for (k, out) in buf.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut r = 0;
                    for &x in &input {
                        acc += x * roots[r];
                        r += k;
                        if r >= n {
                            r -= n;
                        }
                    }
                    *out = acc;
                }
            }
            Kernel::Bluestein {
                inner,
                chirp,
                kernel_spectrum,
            } => {
                let m = inner.len;
                let mut a = vec![Complex64::new(0.0, 0.0); m];
                for ((ak, &x), &w) in a.iter_mut().zip(buf.iter()).zip(chirp) {
                    *ak = x * w;
                }
                inner.process(&mut a);
                // inverse transform via conjugation: ifft(y) = conj(fft(conj(y))) / m
                for (ak, &bk) in a.iter_mut().zip(kernel_spectrum) {
                    *ak = (*ak * bk).conj();
                }
                inner.process(&mut a);
                let scale = 1.0 / m as f64;
                for ((out, &ak), &w) in buf.iter_mut().zip(&a).zip(chirp) {
                    *out = w * ak.conj() * scale;
                }
            }
        }
    }
}

fn radix2(buf: &mut [Complex64], twiddles: &[Complex64], bitrev: &[usize]) {
    let n = buf.len();
    for (i, &j) in bitrev.iter().enumerate() {
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut half = 1;
    while half < n {
        let stride = n / (2 * half);
        for start in (0..n).step_by(2 * half) {
            for k in 0..half {
                let w = twiddles[k * stride];
                let u = buf[start + k];
                let v = buf[start + k + half] * w;
                buf[start + k] = u + v;
                buf[start + k + half] = u - v;
            }
        }
        half *= 2;
    }
}

/// Forward transform of a complex vector of any positive length.
pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    FftPlan::new(x.len()).process(&mut buf);
    buf
}

/// Length-`n` forward DFT of every row of `g`; column `j` of the result is frequency bin `j`.
pub fn fft_rows(g: &RealMatrix) -> Result<ComplexMatrix> {
    g.check_finite("fft input")?;
    let (m, n) = g.shape();
    let plan = FftPlan::new(n);
    let mut out = ComplexMatrix::zeros(m, n);
    for i in 0..m {
        let row = out.row_mut(i);
        for (z, &x) in row.iter_mut().zip(g.row(i)) {
            *z = Complex64::new(x, 0.0);
        }
        plan.process(row);
    }
    Ok(out)
}
