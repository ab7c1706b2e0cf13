//! Full-batch training of a [`Problem`] with one [`ParamState`] per parameter.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::optim::{AdamWConfig, ParamState};
use crate::projector::{Method, ProjectionConfig};
use crate::zoo::Problem;

/// How the configured rank maps onto each parameter's shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicy {
    /// `min(k, min(m, n))`.
    Fixed(usize),
    /// `min(m, n)`.
    Full,
    /// `max(1, ⌊f·min(m, n)⌋)`.
    Fraction(f64),
}

impl RankPolicy {
    pub fn resolve(self, rows: usize, cols: usize) -> usize {
        let full = rows.min(cols);
        match self {
            RankPolicy::Fixed(k) => k.min(full),
            RankPolicy::Full => full,
            RankPolicy::Fraction(f) => ((f * full as f64).floor() as usize).clamp(1, full),
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            RankPolicy::Fixed(0) => Err(Error::InvalidArgument("rank must be at least 1".into())),
            RankPolicy::Fraction(f) if !(f > 0.0 && f <= 1.0) => Err(Error::InvalidArgument(format!(
                "rank fraction must lie in (0, 1], got {f}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for RankPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankPolicy::Fixed(k) => write!(f, "{k}"),
            RankPolicy::Full => f.write_str("min"),
            RankPolicy::Fraction(x) => write!(f, "{x}*min"),
        }
    }
}

impl FromStr for RankPolicy {
    type Err = Error;

    /// `"min"` or a positive integer.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "min" {
            return Ok(RankPolicy::Full);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(RankPolicy::Fixed(k)),
            _ => Err(Error::InvalidArgument(format!("invalid rank `{s}`"))),
        }
    }
}

/// Projection settings for one parameter of the given shape.
///
/// Vectors (a dimension of 1) are trained with dense AdamW. For rsvd the
/// oversampling shrinks so that `k + p ≤ min(m, n)`.
pub fn resolve_projection(
    base: &ProjectionConfig,
    rank: RankPolicy,
    shape: (usize, usize),
    index: usize,
) -> ProjectionConfig {
    let (m, n) = shape;
    let mut cfg = base.clone();
    if m.min(n) == 1 {
        cfg.method = Method::Identity;
        cfg.two_sided = false;
        cfg.rank = 1;
        return cfg;
    }
    cfg.rank = rank.resolve(m, n);
    cfg.rsvd_oversampling = cfg.rsvd_oversampling.min(m.min(n) - cfg.rank);
    cfg.rsvd_seed = cfg.rsvd_seed.wrapping_add((index as u64) << 32);
    cfg
}

/// Per-step summary across all parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: u64,
    /// Loss at the parameters the gradient was taken at.
    pub loss: f64,
    /// `‖∇‖` over all parameters jointly.
    pub grad_norm: f64,
    pub update_norm: f64,
    pub projector_rebuilt: bool,
    pub projector_build_seconds: f64,
    pub state_elements: usize,
    /// Mean of `‖G − lift(reduce(G))‖_F` over parameters whose projector was
    /// rebuilt this step.
    pub projection_error: Option<f64>,
}

pub struct Trainer {
    problem: Box<dyn Problem>,
    states: Vec<ParamState>,
    step: u64,
}

impl Trainer {
    pub fn new(
        problem: Box<dyn Problem>,
        projection: &ProjectionConfig,
        rank: RankPolicy,
        adamw: AdamWConfig,
        seed: u64,
    ) -> Result<Self> {
        rank.validate()?;
        let states = problem
            .init_params(seed)
            .into_iter()
            .enumerate()
            .map(|(i, w)| {
                let cfg = resolve_projection(projection, rank, w.shape(), i);
                ParamState::new(w, cfg, adamw)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            problem,
            states,
            step: 0,
        })
    }

    pub fn problem(&self) -> &dyn Problem {
        self.problem.as_ref()
    }

    pub fn states(&self) -> &[ParamState] {
        &self.states
    }

    pub fn params(&self) -> Vec<RealMatrix> {
        self.states.iter().map(|s| s.weights().clone()).collect()
    }

    pub fn loss(&self) -> Result<f64> {
        self.problem.loss(&self.params())
    }

    pub fn state_elements(&self) -> usize {
        self.states.iter().map(ParamState::state_element_count).sum()
    }

    pub fn step(&mut self) -> Result<StepRecord> {
        let next = self.step + 1;
        let (loss, grads) = self.problem.loss_and_grad(&self.params()).map_err(|e| match e {
            Error::NonFinite { what, value, .. } => Error::Diverged {
                step: next,
                detail: format!("{what} became {value}"),
            },
            other => other,
        })?;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                step: next,
                detail: format!("loss became {loss}"),
            });
        }

        let mut grad_sq = 0.0;
        let mut update_sq = 0.0;
        let mut rebuilt = false;
        let mut build_seconds = 0.0;
        let mut errors = Vec::new();
        for (state, g) in self.states.iter_mut().zip(&grads) {
            grad_sq += g.frobenius_norm_sq();
            let report = state.step(g).map_err(|e| match e {
                Error::NonFinite { what, value, .. } => Error::Diverged {
                    step: next,
                    detail: format!("{what} contains {value}"),
                },
                other => other,
            })?;
            update_sq += report.update_norm * report.update_norm;
            build_seconds += report.projector_build_seconds;
            if report.projector_rebuilt {
                rebuilt = true;
                if state.projection_config().method != Method::Identity {
                    errors.push(state.reconstruction_error(g)?);
                }
            }
        }
        self.step = next;
        Ok(StepRecord {
            step: next,
            loss,
            grad_norm: grad_sq.sqrt(),
            update_norm: update_sq.sqrt(),
            projector_rebuilt: rebuilt,
            projector_build_seconds: build_seconds,
            state_elements: self.state_elements(),
            projection_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
        })
    }
}
