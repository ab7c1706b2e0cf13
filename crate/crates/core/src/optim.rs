//! AdamW whose moments live in a periodically refreshed low-rank subspace.
//!
//! Each step: refresh the projector if due, project the gradient, advance
//! the step counter, update the bias-corrected moments, lift the normalized
//! update back to weight space, then apply decoupled weight decay to the
//! updated weights.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RealMatrix;
use crate::projector::{
    choose_side, identity_build, project, project_back, Method, ProjectionConfig, ProjectorBasis, Side,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidArgument(format!("invalid {what}: {v}")));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate", self.learning_rate);
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", self.beta1);
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", self.beta2);
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return bad("epsilon", self.epsilon);
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return bad("weight_decay", self.weight_decay);
        }
        Ok(())
    }
}

/// Outcome of one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Step counter after the update (the first step reports 1).
    pub step: u64,
    pub projector_rebuilt: bool,
    pub projector_build_seconds: f64,
    /// `‖ΔW‖_F` of the scaled, back-projected update before the learning rate.
    pub update_norm: f64,
    pub state_elements: usize,
}

/// Training state of one weight matrix.
#[derive(Debug, Clone)]
pub struct ParamState {
    weights: RealMatrix,
    first_moment: RealMatrix,
    second_moment: RealMatrix,
    step: u64,
    /// Single-sided basis, or the left basis when two-sided.
    projector: Option<ProjectorBasis>,
    projector_right: Option<ProjectorBasis>,
    side: Side,
    projection: ProjectionConfig,
    adamw: AdamWConfig,
}

impl ParamState {
    /// Zero moments, step 0, no projector yet.
    pub fn new(weights: RealMatrix, projection: ProjectionConfig, adamw: AdamWConfig) -> Result<Self> {
        weights.check_finite("initial weights")?;
        projection.validate()?;
        adamw.validate()?;
        let (m, n) = weights.shape();
        if projection.method != Method::Identity {
            let k = projection.rank;
            if k > m.min(n) {
                return Err(Error::InvalidRank {
                    rank: k,
                    rows: m,
                    cols: n,
                    constraint: "k <= min(m, n)",
                });
            }
            if projection.method == Method::Rsvd && k + projection.rsvd_oversampling > m.min(n) {
                return Err(Error::InvalidRank {
                    rank: k + projection.rsvd_oversampling,
                    rows: m,
                    cols: n,
                    constraint: "k + oversampling <= min(m, n)",
                });
            }
        }
        let side = choose_side(m, n, projection.side_mode);
        let (pr, pc) = projected_shape(m, n, &projection, side);
        Ok(Self {
            weights,
            first_moment: RealMatrix::zeros(pr, pc),
            second_moment: RealMatrix::zeros(pr, pc),
            step: 0,
            projector: None,
            projector_right: None,
            side,
            projection,
            adamw,
        })
    }

    pub fn weights(&self) -> &RealMatrix {
        &self.weights
    }

    pub fn first_moment(&self) -> &RealMatrix {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &RealMatrix {
        &self.second_moment
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn projector(&self) -> Option<&ProjectorBasis> {
        self.projector.as_ref()
    }

    pub fn projector_right(&self) -> Option<&ProjectorBasis> {
        self.projector_right.as_ref()
    }

    /// Side used for single-sided projection.
    pub fn side(&self) -> Side {
        self.side
    }

    pub fn projection_config(&self) -> &ProjectionConfig {
        &self.projection
    }

    pub fn adamw_config(&self) -> &AdamWConfig {
        &self.adamw
    }

    /// Rebuilds the projector(s) from `g` when `t ≡ 0 (mod T)` or none exists yet.
    pub fn refresh_projector_if_due(&mut self, g: &RealMatrix) -> Result<bool> {
        self.check_gradient(g)?;
        let due = self.projector.is_none() || self.step.is_multiple_of(self.projection.update_interval);
        if !due {
            return Ok(false);
        }
        let cfg = &self.projection;
        let t = self.step;
        if cfg.two_sided {
            let left = cfg.build(g, t)?.at_step(t);
            let right = cfg
                .build(&g.transpose(), t.wrapping_add(1))?
                .with_side(Side::Right)
                .at_step(t);
            self.projector = Some(left);
            self.projector_right = Some(right);
        } else {
            let basis = match self.side {
                Side::Left => cfg.build(g, t)?,
                Side::Right if cfg.method == Method::Identity => identity_build(g.cols()),
                Side::Right => cfg.build(&g.transpose(), t)?,
            };
            self.projector = Some(basis.with_side(self.side).at_step(t));
        }
        Ok(true)
    }

    pub fn step(&mut self, g: &RealMatrix) -> Result<StepReport> {
        self.step_with_delta(g).map(|(report, _)| report)
    }

    /// Runs one step and also returns `ΔW = α·project_back(P, N)`.
    ///
    /// A rejected gradient leaves the state untouched; a step that would make
    /// the weights non-finite returns [`Error::Diverged`] without committing
    /// the new weights or moments.
    pub fn step_with_delta(&mut self, g: &RealMatrix) -> Result<(StepReport, RealMatrix)> {
        self.check_gradient(g)?;

        let started = Instant::now();
        let rebuilt = self.refresh_projector_if_due(g)?;
        let build_seconds = if rebuilt { started.elapsed().as_secs_f64() } else { 0.0 };

        let reduced = self.reduce(g)?;
        let t = self.step + 1;
        let AdamWConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
            weight_decay: wd,
        } = self.adamw;

        let m = self.first_moment.zip_with(&reduced, |m, r| b1 * m + (1.0 - b1) * r)?;
        let v = self.second_moment.zip_with(&reduced, |v, r| b2 * v + (1.0 - b2) * r * r)?;
        let bias1 = 1.0 - b1.powf(t as f64);
        let bias2 = 1.0 - b2.powf(t as f64);
        let normalized = m.zip_with(&v, |m, v| (m / bias1) / ((v / bias2).sqrt() + eps))?;

        let delta = self.lift(&normalized)?.scaled(self.projection.scale);
        let stepped = self.weights.zip_with(&delta, |w, d| w - lr * d)?;
        let decayed = stepped.map(|w| w - lr * wd * w);
        if let Err(Error::NonFinite { row, col, value, .. }) = decayed.check_finite("weights") {
            return Err(Error::Diverged {
                step: t,
                detail: format!("weight ({row}, {col}) became {value}"),
            });
        }

        self.first_moment = m;
        self.second_moment = v;
        self.weights = decayed;
        self.step = t;

        let report = StepReport {
            step: t,
            projector_rebuilt: rebuilt,
            projector_build_seconds: build_seconds,
            update_norm: delta.frobenius_norm(),
            state_elements: self.state_element_count(),
        };
        Ok((report, delta))
    }

    /// Optimizer-state scalars: both moments plus any stored basis.
    pub fn state_element_count(&self) -> usize {
        let moments = 2 * self.first_moment.rows() * self.first_moment.cols();
        let (m, n) = self.weights.shape();
        let k = self.projection.rank;
        let bases = match (self.projection.method, self.projection.two_sided, self.side) {
            (Method::Identity, _, _) => 0,
            (_, true, _) => m * k + n * k,
            (_, false, Side::Left) => m * k,
            (_, false, Side::Right) => n * k,
        };
        moments + bases
    }

    /// `‖G − lift(reduce(G))‖_F` with the current projector(s).
    pub fn reconstruction_error(&self, g: &RealMatrix) -> Result<f64> {
        self.check_gradient(g)?;
        if self.projector.is_none() {
            return Err(Error::InvalidArgument("no projector has been built yet".into()));
        }
        Ok(g.sub(&self.lift(&self.reduce(g)?)?)?.frobenius_norm())
    }

    fn check_gradient(&self, g: &RealMatrix) -> Result<()> {
        if g.shape() != self.weights.shape() {
            return Err(Error::ShapeMismatch(format!(
                "gradient is {}x{} but weights are {}x{}",
                g.rows(),
                g.cols(),
                self.weights.rows(),
                self.weights.cols()
            )));
        }
        g.check_finite("gradient")
    }

    fn reduce(&self, g: &RealMatrix) -> Result<RealMatrix> {
        let p = self.projector.as_ref().expect("projector refreshed before use");
        match &self.projector_right {
            Some(q) => project(q, &project(p, g)?),
            None => project(p, g),
        }
    }

    fn lift(&self, n: &RealMatrix) -> Result<RealMatrix> {
        let p = self.projector.as_ref().expect("projector refreshed before use");
        match &self.projector_right {
            Some(q) => project_back(p, &project_back(q, n)?),
            None => project_back(p, n),
        }
    }
}

fn projected_shape(m: usize, n: usize, cfg: &ProjectionConfig, side: Side) -> (usize, usize) {
    let identity = cfg.method == Method::Identity;
    let (kl, kr) = if identity { (m, n) } else { (cfg.rank, cfg.rank) };
    match (cfg.two_sided, side) {
        (true, _) => (kl, kr),
        (false, Side::Left) => (kl, n),
        (false, Side::Right) => (m, kr),
    }
}

/// Textbook dense AdamW with decoupled weight decay, written independently of
/// the projected path. `t` is incremented before the moments are updated.
pub fn dense_adamw_step(
    w: &mut RealMatrix,
    m: &mut RealMatrix,
    v: &mut RealMatrix,
    t: &mut u64,
    g: &RealMatrix,
    cfg: &AdamWConfig,
) -> Result<()> {
    cfg.validate()?;
    if w.shape() != g.shape() || m.shape() != g.shape() || v.shape() != g.shape() {
        return Err(Error::ShapeMismatch("dense AdamW operands must share one shape".into()));
    }
    g.check_finite("gradient")?;
    *t += 1;
    let bc1 = 1.0 - cfg.beta1.powf(*t as f64);
    let bc2 = 1.0 - cfg.beta2.powf(*t as f64);
    let (rows, cols) = g.shape();
    for i in 0..rows {
        for j in 0..cols {
            let gij = g[(i, j)];
            let mij = cfg.beta1 * m[(i, j)] + (1.0 - cfg.beta1) * gij;
            let vij = cfg.beta2 * v[(i, j)] + (1.0 - cfg.beta2) * gij * gij;
            m[(i, j)] = mij;
            v[(i, j)] = vij;
            let update = (mij / bc1) / ((vij / bc2).sqrt() + cfg.epsilon);
            let stepped = w[(i, j)] - cfg.learning_rate * update;
            w[(i, j)] = stepped - cfg.learning_rate * cfg.weight_decay * stepped;
        }
    }
    if let Err(Error::NonFinite { row, col, value, .. }) = w.check_finite("weights") {
        return Err(Error::Diverged {
            step: *t,
            detail: format!("weight ({row}, {col}) became {value}"),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projector::SideMode;

    fn identity_cfg() -> ProjectionConfig {
        ProjectionConfig {
            method: Method::Identity,
            ..Default::default()
        }
    }

    #[test]
    fn init_shapes() {
        let cfg = ProjectionConfig {
            rank: 2,
            ..Default::default()
        };
        let s = ParamState::new(RealMatrix::zeros(4, 4), cfg.clone(), AdamWConfig::default()).unwrap();
        assert_eq!(s.step_count(), 0);
        assert_eq!(s.side(), Side::Left);
        assert_eq!(s.first_moment().shape(), (2, 4));
        assert_eq!(s.second_moment().frobenius_norm(), 0.0);
        assert!(s.projector().is_none());

        let s = ParamState::new(RealMatrix::zeros(3, 5), identity_cfg(), AdamWConfig::default()).unwrap();
        assert_eq!(s.first_moment().shape(), (3, 5));

        let too_big = ProjectionConfig { rank: 5, ..cfg };
        assert!(ParamState::new(RealMatrix::zeros(4, 4), too_big, AdamWConfig::default()).is_err());
    }

    #[test]
    fn scalar_step_by_hand() {
        let cfg = AdamWConfig {
            learning_rate: 0.1,
            ..Default::default()
        };
        let mut s = ParamState::new(RealMatrix::from_rows(&[[1.0]]).unwrap(), identity_cfg(), cfg).unwrap();
        s.step(&RealMatrix::from_rows(&[[0.5]]).unwrap()).unwrap();
        let expected = 1.0 - 0.1 * (0.5 / (0.5 + 1e-8));
        assert!((s.weights()[(0, 0)] - expected).abs() < 1e-15);
        assert!((s.weights()[(0, 0)] - 0.9).abs() < 1e-8);

        let (mut w, mut m, mut v, mut t) = (
            RealMatrix::from_rows(&[[1.0]]).unwrap(),
            RealMatrix::zeros(1, 1),
            RealMatrix::zeros(1, 1),
            0,
        );
        dense_adamw_step(&mut w, &mut m, &mut v, &mut t, &RealMatrix::from_rows(&[[0.5]]).unwrap(), &cfg).unwrap();
        assert_eq!(t, 1);
        assert!((w[(0, 0)] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point_without_decay() {
        let w0 = RealMatrix::seeded_gaussian(6, 4, 1);
        let cfg = ProjectionConfig {
            rank: 2,
            ..Default::default()
        };
        let mut s = ParamState::new(w0.clone(), cfg, AdamWConfig::default()).unwrap();
        for _ in 0..5 {
            s.step(&RealMatrix::zeros(6, 4)).unwrap();
        }
        assert_eq!(s.weights(), &w0);
    }

    #[test]
    fn refresh_cadence() {
        let cfg = ProjectionConfig {
            rank: 2,
            update_interval: 3,
            ..Default::default()
        };
        let mut s = ParamState::new(RealMatrix::zeros(5, 4), cfg, AdamWConfig::default()).unwrap();
        let mut rebuilt_at = Vec::new();
        for i in 0..10u64 {
            let g = RealMatrix::seeded_gaussian(5, 4, i);
            let before = s.projector().cloned();
            let r = s.step(&g).unwrap();
            if r.projector_rebuilt {
                rebuilt_at.push(r.step - 1);
            } else {
                assert_eq!(r.projector_build_seconds, 0.0);
                assert_eq!(s.projector(), before.as_ref());
            }
        }
        assert_eq!(rebuilt_at, vec![0, 3, 6, 9]);
    }

    #[test]
    fn bad_gradient_leaves_state_untouched() {
        let mut s = ParamState::new(RealMatrix::zeros(3, 3), identity_cfg(), AdamWConfig::default()).unwrap();
        let mut g = RealMatrix::zeros(3, 3);
        g[(1, 1)] = f64::NAN;
        assert!(s.step(&g).is_err());
        assert!(s.step(&RealMatrix::zeros(2, 3)).is_err());
        assert_eq!(s.step_count(), 0);
        assert!(s.projector().is_none());
    }

    #[test]
    fn overflow_reports_divergence() {
        let cfg = AdamWConfig {
            learning_rate: 1e308,
            ..Default::default()
        };
        let mut s = ParamState::new(RealMatrix::from_rows(&[[-1e308]]).unwrap(), identity_cfg(), cfg).unwrap();
        let err = s.step(&RealMatrix::from_rows(&[[1.0]]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Diverged { step: 1, .. }));
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn memory_accounting() {
        let w = RealMatrix::zeros(1024, 512);
        let cfg = ProjectionConfig {
            rank: 128,
            side_mode: SideMode::ReverseStd,
            ..Default::default()
        };
        let s = ParamState::new(w.clone(), cfg.clone(), AdamWConfig::default()).unwrap();
        assert_eq!(s.side(), Side::Left);
        assert_eq!(s.state_element_count(), 262_144);

        let dense = ParamState::new(w.clone(), identity_cfg(), AdamWConfig::default()).unwrap();
        assert_eq!(dense.state_element_count(), 2 * 1024 * 512);

        let two = ParamState::new(w, ProjectionConfig { two_sided: true, ..cfg }, AdamWConfig::default()).unwrap();
        assert_eq!(two.state_element_count(), 2 * 128 * 128 + 1024 * 128 + 512 * 128);
    }

    #[test]
    fn invalid_adamw_configs() {
        for bad in [
            AdamWConfig { beta1: 1.0, ..Default::default() },
            AdamWConfig { beta2: -0.1, ..Default::default() },
            AdamWConfig { epsilon: 0.0, ..Default::default() },
            AdamWConfig { learning_rate: 0.0, ..Default::default() },
            AdamWConfig { weight_decay: -1.0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
