//! Dense double-precision kernels: matrices, DFT, QR and SVD.

mod fft;
mod matrix;
mod qr;
mod svd;

pub use fft::{fft, fft_rows, naive_dft, FftPlan, DIRECT_CUTOFF};
pub use matrix::{seeded_rng, ComplexMatrix, RealMatrix};
pub use qr::{qr_complex, qr_real};
pub use svd::{svd, svd_left, SvdResult};
