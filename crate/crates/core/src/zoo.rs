//! Small differentiable problems with hand-written gradients.
//!
//! Every problem is full-batch: the data lives inside the problem and the
//! parameters are a list of matrices.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{seeded_rng, RealMatrix};

/// A loss over a list of matrix parameters.
pub trait Problem {
    fn name(&self) -> &str;

    fn shapes(&self) -> Vec<(usize, usize)>;

    fn init_params(&self, seed: u64) -> Vec<RealMatrix>;

    fn loss_and_grad(&self, params: &[RealMatrix]) -> Result<(f64, Vec<RealMatrix>)>;

    fn loss(&self, params: &[RealMatrix]) -> Result<f64> {
        self.loss_and_grad(params).map(|(l, _)| l)
    }
}

fn check_params(shapes: &[(usize, usize)], params: &[RealMatrix]) -> Result<()> {
    if params.len() != shapes.len() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} parameters, got {}",
            shapes.len(),
            params.len()
        )));
    }
    for (i, (p, &s)) in params.iter().zip(shapes).enumerate() {
        if p.shape() != s {
            return Err(Error::ShapeMismatch(format!(
                "parameter {i} is {}x{}, expected {}x{}",
                p.rows(),
                p.cols(),
                s.0,
                s.1
            )));
        }
    }
    Ok(())
}

/// `½‖W − W*‖²_F` and `W − W*`.
pub fn quadratic_bowl(w: &RealMatrix, target: &RealMatrix) -> Result<(f64, RealMatrix)> {
    let diff = w.sub(target)?;
    Ok((0.5 * diff.frobenius_norm_sq(), diff))
}

/// `(1/2N)‖XW − Y‖²_F` and `(1/N)·Xᵀ(XW − Y)`.
pub fn linreg(w: &RealMatrix, x: &RealMatrix, y: &RealMatrix) -> Result<(f64, RealMatrix)> {
    let n = x.rows() as f64;
    let residual = x.matmul(w)?.sub(y)?;
    let grad = x.tr_matmul(&residual)?.scaled(1.0 / n);
    Ok((residual.frobenius_norm_sq() / (2.0 * n), grad))
}

/// Two-layer tanh network with softmax cross-entropy, averaged over the batch.
///
/// `params = [W₁ (d×h), b₁ (1×h), W₂ (h×C), b₂ (1×C)]`.
pub fn mlp2(params: &[RealMatrix], x: &RealMatrix, labels: &[usize]) -> Result<(f64, Vec<RealMatrix>)> {
    let [w1, b1, w2, b2] = params else {
        return Err(Error::ShapeMismatch(format!("mlp2 takes 4 parameters, got {}", params.len())));
    };
    let (n, d) = x.shape();
    let (h, c) = w2.shape();
    check_params(&[(d, h), (1, h), (h, c), (1, c)], params)?;
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!("{} labels for {n} inputs", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::InvalidArgument(format!("label {bad} outside 0..{c}")));
    }

    let mut hidden = x.matmul(w1)?;
    for i in 0..n {
        for j in 0..h {
            hidden[(i, j)] = (hidden[(i, j)] + b1[(0, j)]).tanh();
        }
    }
    let mut probs = hidden.matmul(w2)?;
    let mut loss = 0.0;
    for i in 0..n {
        for j in 0..c {
            probs[(i, j)] += b2[(0, j)];
        }
        let row = probs.row(i);
        let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = top + row.iter().map(|z| (z - top).exp()).sum::<f64>().ln();
        loss += log_sum - row[labels[i]];
        for j in 0..c {
            probs[(i, j)] = (probs[(i, j)] - log_sum).exp();
        }
    }
    loss /= n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            what: "mlp2 loss",
            row: 0,
            col: 0,
            value: loss,
        });
    }
    hidden.check_finite("hidden activations")?;

    // dZ₂ = (P − Y)/N
    let mut dz2 = probs;
    for (i, &y) in labels.iter().enumerate() {
        dz2[(i, y)] -= 1.0;
    }
    let dz2 = dz2.scaled(1.0 / n as f64);
    let dw2 = hidden.tr_matmul(&dz2)?;
    let db2 = column_sums(&dz2);
    let mut dz1 = dz2.matmul_tr(w2)?;
    for i in 0..n {
        for j in 0..h {
            let a = hidden[(i, j)];
            dz1[(i, j)] *= 1.0 - a * a;
        }
    }
    let dw1 = x.tr_matmul(&dz1)?;
    let db1 = column_sums(&dz1);
    Ok((loss, vec![dw1, db1, dw2, db2]))
}

fn column_sums(a: &RealMatrix) -> RealMatrix {
    let mut out = RealMatrix::zeros(1, a.cols());
    for i in 0..a.rows() {
        for (j, v) in a.row(i).iter().enumerate() {
            out[(0, j)] += v;
        }
    }
    out
}

/// Parameters of a Gaussian-blob classification set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    pub separation: f64,
    pub noise: f64,
}

/// Labelled inputs regenerated bit-for-bit from `seed` and `spec`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub inputs: RealMatrix,
    pub labels: Vec<usize>,
    pub centers: RealMatrix,
    pub seed: u64,
    pub spec: BlobSpec,
}

/// `C` isotropic Gaussian clusters whose centers lie at distance `separation`
/// from the origin along random directions. Sample `i` belongs to class `i mod C`.
pub fn make_blobs(
    seed: u64,
    samples: usize,
    features: usize,
    classes: usize,
    separation: f64,
    noise: f64,
) -> Result<SynthDataset> {
    if classes < 2 || samples < classes || features == 0 {
        return Err(Error::InvalidArgument(format!(
            "need samples >= classes >= 2 and features >= 1 (got N={samples}, C={classes}, d={features})"
        )));
    }
    if !(separation.is_finite() && separation >= 0.0 && noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "separation and noise must be finite and non-negative (got {separation}, {noise})"
        )));
    }
    let mut rng = seeded_rng(seed);
    let mut centers = RealMatrix::gaussian(classes, features, &mut rng);
    for c in 0..classes {
        let norm = centers.row(c).iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..features {
            centers[(c, j)] *= separation / norm;
        }
    }
    let labels: Vec<usize> = (0..samples).map(|i| i % classes).collect();
    let inputs = RealMatrix::from_fn(samples, features, |i, j| {
        let z: f64 = rng.sample(StandardNormal);
        centers[(labels[i], j)] + noise * z
    });
    Ok(SynthDataset {
        inputs,
        labels,
        centers,
        seed,
        spec: BlobSpec {
            samples,
            features,
            classes,
            separation,
            noise,
        },
    })
}

/// Minimize `½‖W − W*‖²_F` from a seeded start.
#[derive(Debug, Clone)]
pub struct QuadraticBowl {
    pub target: RealMatrix,
}

impl QuadraticBowl {
    pub fn seeded(rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            target: RealMatrix::seeded_gaussian(rows, cols, seed),
        }
    }
}

impl Problem for QuadraticBowl {
    fn name(&self) -> &str {
        "quadratic"
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![self.target.shape()]
    }

    fn init_params(&self, seed: u64) -> Vec<RealMatrix> {
        let (m, n) = self.target.shape();
        vec![self.target.add(&RealMatrix::seeded_gaussian(m, n, seed)).expect("same shape")]
    }

    fn loss_and_grad(&self, params: &[RealMatrix]) -> Result<(f64, Vec<RealMatrix>)> {
        check_params(&self.shapes(), params)?;
        let (l, g) = quadratic_bowl(&params[0], &self.target)?;
        Ok((l, vec![g]))
    }
}

/// Multi-output least squares `Y ≈ X·W`.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    pub x: RealMatrix,
    pub y: RealMatrix,
}

impl LinearRegression {
    /// Gaussian `X` (`N×d`), `Y = X·W_true + noise·E` with `W_true` of shape `d×outputs`.
    pub fn seeded(samples: usize, features: usize, outputs: usize, noise: f64, seed: u64) -> Self {
        let mut rng = seeded_rng(seed);
        let x = RealMatrix::gaussian(samples, features, &mut rng);
        let w_true = RealMatrix::gaussian(features, outputs, &mut rng);
        let e = RealMatrix::gaussian(samples, outputs, &mut rng);
        let y = x.matmul(&w_true).expect("conformable").add(&e.scaled(noise)).expect("same shape");
        Self { x, y }
    }
}

impl Problem for LinearRegression {
    fn name(&self) -> &str {
        "linreg"
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![(self.x.cols(), self.y.cols())]
    }

    fn init_params(&self, seed: u64) -> Vec<RealMatrix> {
        let (d, c) = self.shapes()[0];
        vec![RealMatrix::seeded_gaussian(d, c, seed).scaled(1.0 / (d as f64).sqrt())]
    }

    fn loss_and_grad(&self, params: &[RealMatrix]) -> Result<(f64, Vec<RealMatrix>)> {
        check_params(&self.shapes(), params)?;
        let (l, g) = linreg(&params[0], &self.x, &self.y)?;
        Ok((l, vec![g]))
    }
}

/// [`mlp2`] on a blob dataset.
#[derive(Debug, Clone)]
pub struct MlpBlobs {
    pub data: SynthDataset,
    pub hidden: usize,
}

impl Problem for MlpBlobs {
    fn name(&self) -> &str {
        "mlp_blobs"
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        let (d, h, c) = (self.data.spec.features, self.hidden, self.data.spec.classes);
        vec![(d, h), (1, h), (h, c), (1, c)]
    }

    /// Weights scaled by `1/√fan_in`, zero biases.
    fn init_params(&self, seed: u64) -> Vec<RealMatrix> {
        let mut rng = seeded_rng(seed);
        self.shapes()
            .into_iter()
            .map(|(r, c)| {
                if r == 1 {
                    RealMatrix::zeros(r, c)
                } else {
                    RealMatrix::gaussian(r, c, &mut rng).scaled(1.0 / (r as f64).sqrt())
                }
            })
            .collect()
    }

    fn loss_and_grad(&self, params: &[RealMatrix]) -> Result<(f64, Vec<RealMatrix>)> {
        mlp2(params, &self.data.inputs, &self.data.labels)
    }
}

/// Gradient-shaped test matrix: a rank-`rank` Gaussian product plus
/// `noise`-scaled i.i.d. Gaussian entries.
pub fn synthetic_gradient(rows: usize, cols: usize, rank: usize, noise: f64, seed: u64) -> RealMatrix {
    let mut rng = seeded_rng(seed);
    let rank = rank.clamp(1, rows.min(cols));
    let a = RealMatrix::gaussian(rows, rank, &mut rng);
    let b = RealMatrix::gaussian(cols, rank, &mut rng);
    let e = RealMatrix::gaussian(rows, cols, &mut rng);
    a.matmul_tr(&b).expect("conformable").zip_with(&e, |s, z| s + noise * z).expect("same shape")
}

/// Largest relative discrepancy, per parameter, between the analytic gradient
/// and central differences with step `h`:
/// `‖g − g_fd‖_F / max(‖g‖_F, ‖g_fd‖_F, 1e-12)`.
pub fn gradient_check(problem: &dyn Problem, params: &[RealMatrix], h: f64) -> Result<f64> {
    let (_, grads) = problem.loss_and_grad(params)?;
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for (p, analytic) in grads.iter().enumerate() {
        let (r, c) = analytic.shape();
        let mut numeric = RealMatrix::zeros(r, c);
        for i in 0..r {
            for j in 0..c {
                let orig = work[p][(i, j)];
                work[p][(i, j)] = orig + h;
                let up = problem.loss(&work)?;
                work[p][(i, j)] = orig - h;
                let down = problem.loss(&work)?;
                work[p][(i, j)] = orig;
                numeric[(i, j)] = (up - down) / (2.0 * h);
            }
        }
        let scale = analytic.frobenius_norm().max(numeric.frobenius_norm()).max(1e-12);
        worst = worst.max(analytic.sub(&numeric)?.frobenius_norm() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_examples() {
        let t = RealMatrix::seeded_gaussian(3, 2, 1);
        let (l, g) = quadratic_bowl(&t, &t).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g.frobenius_norm(), 0.0);

        let e = RealMatrix::seeded_gaussian(3, 2, 2);
        let (_, g) = quadratic_bowl(&t.add(&e).unwrap(), &t).unwrap();
        assert!(g.max_abs_diff(&e) < 1e-15);

        let mut w = t.add(&e).unwrap();
        let mut dist = e.frobenius_norm();
        for _ in 0..5 {
            let (_, g) = quadratic_bowl(&w, &t).unwrap();
            w = w.sub(&g.scaled(0.5)).unwrap();
            let next = w.sub(&t).unwrap().frobenius_norm();
            assert!((next - 0.5 * dist).abs() < 1e-14);
            dist = next;
        }
        assert!(quadratic_bowl(&RealMatrix::zeros(2, 2), &t).is_err());
    }

    #[test]
    fn linreg_examples() {
        let w = RealMatrix::seeded_gaussian(3, 2, 3);
        let (_, g) = linreg(&w, &RealMatrix::identity(3), &RealMatrix::zeros(3, 2)).unwrap();
        assert!(g.max_abs_diff(&w.scaled(1.0 / 3.0)) < 1e-15);

        // exact solution of a square invertible system
        let x = RealMatrix::from_rows(&[[2.0, 1.0], [1.0, 3.0]]).unwrap();
        let w = RealMatrix::from_rows(&[[1.0], [-2.0]]).unwrap();
        let y = x.matmul(&w).unwrap();
        let (l, g) = linreg(&w, &x, &y).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.max_abs() < 1e-10);
    }

    #[test]
    fn mlp_zero_weights_give_log_classes() {
        let data = make_blobs(1, 12, 5, 3, 2.0, 0.5).unwrap();
        let prob = MlpBlobs { data, hidden: 4 };
        let zeros: Vec<RealMatrix> = prob.shapes().into_iter().map(|(r, c)| RealMatrix::zeros(r, c)).collect();
        let l = prob.loss(&zeros).unwrap();
        assert!((l - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mlp_rejects_bad_inputs() {
        let data = make_blobs(1, 8, 3, 2, 2.0, 0.5).unwrap();
        let prob = MlpBlobs { data: data.clone(), hidden: 4 };
        let p = prob.init_params(0);
        assert!(mlp2(&p[..3], &data.inputs, &data.labels).is_err());
        assert!(mlp2(&p, &data.inputs, &data.labels[..4]).is_err());
        assert!(mlp2(&p, &data.inputs, &[5; 8]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let problems: Vec<Box<dyn Problem>> = vec![
            Box::new(QuadraticBowl::seeded(4, 3, 1)),
            Box::new(LinearRegression::seeded(20, 4, 2, 0.1, 2)),
            Box::new(MlpBlobs {
                data: make_blobs(3, 24, 5, 3, 2.0, 1.0).unwrap(),
                hidden: 6,
            }),
        ];
        for p in &problems {
            for seed in 0..3 {
                let err = gradient_check(p.as_ref(), &p.init_params(seed), 1e-5).unwrap();
                assert!(err < 1e-6, "{} seed {seed}: {err:e}", p.name());
            }
        }
    }

    #[test]
    fn blobs_are_deterministic_and_balanced() {
        let a = make_blobs(9, 103, 4, 4, 3.0, 0.7).unwrap();
        assert_eq!(a, make_blobs(9, 103, 4, 4, 3.0, 0.7).unwrap());
        assert_ne!(a.inputs, make_blobs(10, 103, 4, 4, 3.0, 0.7).unwrap().inputs);
        let counts: Vec<usize> = (0..4).map(|c| a.labels.iter().filter(|&&y| y == c).count()).collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        for c in 0..4 {
            let r: f64 = a.centers.row(c).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noiseless_blobs_sit_on_their_centers() {
        let d = make_blobs(2, 10, 3, 2, 5.0, 0.0).unwrap();
        for i in 0..10 {
            assert_eq!(d.inputs.row(i), d.centers.row(d.labels[i]));
        }
    }

    #[test]
    fn blob_argument_errors() {
        assert!(make_blobs(0, 1, 2, 2, 1.0, 1.0).is_err());
        assert!(make_blobs(0, 10, 2, 1, 1.0, 1.0).is_err());
        assert!(make_blobs(0, 10, 0, 2, 1.0, 1.0).is_err());
        assert!(make_blobs(0, 10, 2, 2, 1.0, -1.0).is_err());
    }
}
