//! Orthonormal low-rank projection bases and their application to gradients.
//!
//! Every builder takes an `m×n` gradient and returns an `m×k` basis meant for
//! left projection. A right-side basis is obtained by running the same builder
//! on the transposed gradient.

mod baselines;
mod deft;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;

pub use baselines::{dct_build, dct_coefficients, identity_build, rsvd_build, svd_build};
pub use deft::{deft_build, energy_spectrum, real_imag_expand, select_top_k, FrequencySelection};

/// Projector construction method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Deft,
    Svd,
    Rsvd,
    Dct,
    Identity,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Deft, Method::Svd, Method::Rsvd, Method::Dct, Method::Identity];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Deft => "deft",
            Method::Svd => "svd",
            Method::Rsvd => "rsvd",
            Method::Dct => "dct",
            Method::Identity => "identity",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown projector method `{s}`")))
    }
}

/// Which side of the gradient a basis multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `Pᵀ·G`, basis spans the row dimension.
    Left,
    /// `G·P`, basis spans the column dimension.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideMode {
    /// Project over the smaller dimension.
    Std,
    /// Project over the larger dimension.
    ReverseStd,
}

/// Column order used when splitting the complex basis into real and imaginary parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchLayout {
    /// `[Re q₁, Im q₁, Re q₂, Im q₂, …]`
    Interleaved,
    /// `[Re q₁ … Re q_k, Im q₁ … Im q_k]`
    Block,
}

/// `std`: right projection when `m ≥ n`, otherwise left. `reverse_std` inverts that.
pub fn choose_side(m: usize, n: usize, mode: SideMode) -> Side {
    match (mode, m >= n) {
        (SideMode::Std, true) | (SideMode::ReverseStd, false) => Side::Right,
        (SideMode::Std, false) | (SideMode::ReverseStd, true) => Side::Left,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub method: Method,
    pub rank: usize,
    pub update_interval: u64,
    pub side_mode: SideMode,
    pub sketch_layout: SketchLayout,
    pub scale: f64,
    pub two_sided: bool,
    pub rsvd_oversampling: usize,
    pub rsvd_seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            method: Method::Deft,
            rank: 128,
            update_interval: 50,
            side_mode: SideMode::ReverseStd,
            sketch_layout: SketchLayout::Interleaved,
            scale: 1.0,
            two_sided: false,
            rsvd_oversampling: 8,
            rsvd_seed: 0,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidArgument("rank must be at least 1".into()));
        }
        if self.update_interval == 0 {
            return Err(Error::InvalidArgument("update_interval must be at least 1".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    /// Builds a basis for `g` (left side, `d = m`) with this config's method and rank.
    pub fn build(&self, g: &RealMatrix, seed_offset: u64) -> Result<ProjectorBasis> {
        match self.method {
            Method::Deft => deft_build(g, self.rank, self.sketch_layout),
            Method::Svd => svd_build(g, self.rank),
            Method::Rsvd => rsvd_build(
                g,
                self.rank,
                self.rsvd_oversampling,
                self.rsvd_seed.wrapping_add(seed_offset),
            ),
            Method::Dct => dct_build(g, self.rank),
            Method::Identity => Ok(identity_build(g.rows())),
        }
    }
}

/// Orthonormal `d×k` basis with the side it applies to.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorBasis {
    pub basis: RealMatrix,
    pub side: Side,
    pub built_at_step: u64,
    pub method: Method,
}

/// Columns must be orthonormal to this tolerance.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

impl ProjectorBasis {
    /// Wraps an externally supplied basis after checking its invariants.
    pub fn new(basis: RealMatrix, side: Side, method: Method, built_at_step: u64) -> Result<Self> {
        if basis.cols() > basis.rows() {
            return Err(Error::InvalidRank {
                rank: basis.cols(),
                rows: basis.rows(),
                cols: basis.cols(),
                constraint: "k <= d",
            });
        }
        let defect = basis.orthonormality_defect();
        if defect >= ORTHONORMALITY_TOL {
            return Err(Error::InvalidArgument(format!(
                "basis columns are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(Self {
            basis,
            side,
            built_at_step,
            method,
        })
    }

    pub(crate) fn left(basis: RealMatrix, method: Method) -> Self {
        Self {
            basis,
            side: Side::Left,
            built_at_step: 0,
            method,
        }
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn with_side(mut self, side: Side) -> Self {
        self.side = side;
        self
    }

    pub fn at_step(mut self, step: u64) -> Self {
        self.built_at_step = step;
        self
    }

    /// Stored scalars; the identity basis is implicit and stores none.
    pub fn element_count(&self) -> usize {
        match self.method {
            Method::Identity => 0,
            _ => self.basis.rows() * self.basis.cols(),
        }
    }
}

/// Left: `Pᵀ·G` (`k×n`). Right: `G·P` (`m×k`).
pub fn project(p: &ProjectorBasis, g: &RealMatrix) -> Result<RealMatrix> {
    let (m, n) = g.shape();
    let expected = match p.side {
        Side::Left => m,
        Side::Right => n,
    };
    if p.dim() != expected {
        return Err(Error::ShapeMismatch(format!(
            "{:?} basis of dimension {} cannot project a {m}x{n} gradient",
            p.side,
            p.dim()
        )));
    }
    if p.method == Method::Identity {
        return Ok(g.clone());
    }
    match p.side {
        Side::Left => p.basis.tr_matmul(g),
        Side::Right => g.matmul(&p.basis),
    }
}

/// Left: `P·N` (`m×n`). Right: `N·Pᵀ` (`m×n`).
pub fn project_back(p: &ProjectorBasis, low_rank: &RealMatrix) -> Result<RealMatrix> {
    let (r, c) = low_rank.shape();
    let expected = match p.side {
        Side::Left => r,
        Side::Right => c,
    };
    if p.rank() != expected {
        return Err(Error::ShapeMismatch(format!(
            "{:?} basis of rank {} cannot lift a {r}x{c} update",
            p.side,
            p.rank()
        )));
    }
    if p.method == Method::Identity {
        return Ok(low_rank.clone());
    }
    match p.side {
        Side::Left => p.basis.matmul(low_rank),
        Side::Right => low_rank.matmul_tr(&p.basis),
    }
}

/// `‖G − project_back(P, project(P, G))‖_F`.
pub fn projection_error(g: &RealMatrix, p: &ProjectorBasis) -> Result<f64> {
    let lifted = project_back(p, &project(p, g)?)?;
    Ok(g.sub(&lifted)?.frobenius_norm())
}

pub(crate) fn check_rank(g: &RealMatrix, k: usize) -> Result<()> {
    let (m, n) = g.shape();
    if k == 0 || k > m.min(n) {
        return Err(Error::InvalidRank {
            rank: k,
            rows: m,
            cols: n,
            constraint: "1 <= k <= min(m, n)",
        });
    }
    Ok(())
}
