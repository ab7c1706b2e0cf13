//! Memory-efficient optimizers built on gradient low-rank projection.
//!
//! The crate provides the dense kernels ([`linalg`]), five projector
//! builders including the energy-based Fourier projector ([`projector`]),
//! an AdamW optimizer whose moments live in the projected space
//! ([`optim`]), and small differentiable problems for convergence
//! experiments ([`zoo`]).

pub mod error;
pub mod linalg;
pub mod optim;
pub mod projector;
pub mod train;
pub mod zoo;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, RealMatrix, SvdResult};
pub use optim::{AdamWConfig, ParamState, StepReport};
pub use projector::{Method, ProjectionConfig, ProjectorBasis, Side, SideMode, SketchLayout};
pub use train::{RankPolicy, StepRecord, Trainer};
pub use zoo::{Problem, SynthDataset};
