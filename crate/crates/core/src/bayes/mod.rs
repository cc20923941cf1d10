//! Multiclass Bayesian logistic regression with a Laplace-approximate
//! posterior: MAP fitting, posterior weight sampling, model-averaged
//! prediction, and incremental refits.

pub mod fit;
pub mod hessian;
pub mod posterior;
pub mod predict;

pub use fit::{map_fit, map_objective, map_gradient, FitReport};
pub use hessian::{fisher_block, hessian};
pub use posterior::{laplace_posterior, refit_with, PosteriorEnsemble};
pub use predict::{predict, predict_with_ids, BmaMatrix, Predictions};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Isotropic Gaussian prior over all parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    variance: f64,
}

impl Prior {
    pub fn new(variance: f64) -> Result<Self> {
        if variance > 0.0 && variance.is_finite() {
            Ok(Self { variance })
        } else {
            Err(Error::InvalidConfig(format!(
                "prior variance must be positive, got {variance}"
            )))
        }
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn precision(&self) -> f64 {
        1.0 / self.variance
    }
}

impl Default for Prior {
    fn default() -> Self {
        Self { variance: 1.0 }
    }
}

/// Weights `W` (c x d) and biases `b` (c) of a softmax classifier.
///
/// The flat parameter vector is class-major: for class `i`, the block
/// `theta[i*(d+1) .. (i+1)*(d+1)]` holds `[W[i, 0..d], b[i]]`, so the
/// per-point Fisher block is `(diag(p) - p p^T) (x) z z^T` with `z = [x; 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPoint {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl WeightPoint {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        Self {
            w: DMatrix::zeros(num_classes, dim),
            b: DVector::zeros(num_classes),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.w.nrows()
    }

    pub fn dim(&self) -> usize {
        self.w.ncols()
    }

    /// Total parameter count P = c * (d + 1).
    pub fn n_params(&self) -> usize {
        self.num_classes() * (self.dim() + 1)
    }

    pub fn logits(&self, x: &[f64]) -> DVector<f64> {
        debug_assert_eq!(x.len(), self.dim());
        let mut out = self.b.clone();
        for i in 0..self.num_classes() {
            out[i] += self.w.row(i).iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        out
    }

    /// Softmax class probabilities at `x`.
    pub fn probs(&self, x: &[f64]) -> Vec<f64> {
        softmax(self.logits(x).as_slice())
    }

    pub fn to_flat(&self) -> DVector<f64> {
        let (c, d) = (self.num_classes(), self.dim());
        let mut theta = DVector::zeros(c * (d + 1));
        for i in 0..c {
            for j in 0..d {
                theta[i * (d + 1) + j] = self.w[(i, j)];
            }
            theta[i * (d + 1) + d] = self.b[i];
        }
        theta
    }

    pub fn from_flat(theta: &DVector<f64>, num_classes: usize, dim: usize) -> Self {
        assert_eq!(theta.len(), num_classes * (dim + 1));
        let mut w = DMatrix::zeros(num_classes, dim);
        let mut b = DVector::zeros(num_classes);
        for i in 0..num_classes {
            for j in 0..dim {
                w[(i, j)] = theta[i * (dim + 1) + j];
            }
            b[i] = theta[i * (dim + 1) + dim];
        }
        Self { w, b }
    }
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / z).collect()
}

pub(crate) fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln()
}

/// An owned labeled training set.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    num_classes: usize,
    dim: usize,
    xs: Vec<f64>,
    ys: Vec<usize>,
}

impl LabeledSet {
    pub fn new(num_classes: usize, dim: usize) -> Self {
        Self {
            num_classes,
            dim,
            xs: Vec::new(),
            ys: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], y: usize) {
        assert_eq!(x.len(), self.dim);
        assert!(y < self.num_classes, "label {y} out of range");
        self.xs.extend_from_slice(x);
        self.ys.push(y);
    }

    pub fn with_extra(&self, x: &[f64], y: usize) -> Self {
        let mut out = self.clone();
        out.push(x, y);
        out
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.ys[i]
    }

    pub fn examples(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.xs.chunks_exact(self.dim.max(1)).zip(self.ys.iter().copied())
    }
}

/// Per-sample class probabilities over a set of points: `probs[j, i, :]` is
/// the predictive of weight sample `j` at point `i`. Every row lies on the
/// simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveTensor {
    probs: Vec<f64>,
    k: usize,
    n: usize,
    c: usize,
    pub point_ids: Vec<usize>,
}

impl PredictiveTensor {
    pub fn from_probs(probs: Vec<f64>, k: usize, n: usize, c: usize, point_ids: Vec<usize>) -> Self {
        assert_eq!(probs.len(), k * n * c);
        assert_eq!(point_ids.len(), n);
        for row in probs.chunks_exact(c) {
            let sum: f64 = row.iter().sum();
            assert!(
                row.iter().all(|&p| p >= 0.0) && (sum - 1.0).abs() <= 1e-9,
                "predictive row off the simplex (sum {sum})"
            );
        }
        Self {
            probs,
            k,
            n,
            c,
            point_ids,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.c
    }

    /// Predictive row of weight sample `j` at point index `i` (local index).
    pub fn row(&self, j: usize, i: usize) -> &[f64] {
        let base = (j * self.n + i) * self.c;
        &self.probs[base..base + self.c]
    }

    /// Model-averaged predictive at point `i`.
    pub fn bma_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.c];
        for j in 0..self.k {
            for (o, p) in out.iter_mut().zip(self.row(j, i)) {
                *o += p;
            }
        }
        for o in &mut out {
            *o /= self.k as f64;
        }
        out
    }

    /// Tensor restricted to a subset of local point indices.
    pub fn select(&self, indices: &[usize]) -> PredictiveTensor {
        let mut probs = Vec::with_capacity(self.k * indices.len() * self.c);
        for j in 0..self.k {
            for &i in indices {
                probs.extend_from_slice(self.row(j, i));
            }
        }
        PredictiveTensor {
            probs,
            k: self.k,
            n: indices.len(),
            c: self.c,
            point_ids: indices.iter().map(|&i| self.point_ids[i]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_round_trip() {
        let mut wp = WeightPoint::zeros(3, 2);
        wp.w[(0, 0)] = 1.0;
        wp.w[(2, 1)] = -4.5;
        wp.b[1] = 2.25;
        let theta = wp.to_flat();
        assert_eq!(theta.len(), 9);
        assert_eq!(WeightPoint::from_flat(&theta, 3, 2), wp);
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = softmax(&[0.0, 0.0, 0.0, 0.0]);
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    #[should_panic(expected = "simplex")]
    fn tensor_rejects_off_simplex_rows() {
        PredictiveTensor::from_probs(vec![0.7, 0.7], 1, 1, 2, vec![0]);
    }

    #[test]
    fn tensor_select_keeps_rows_and_ids() {
        let probs = vec![
            0.1, 0.9, 0.5, 0.5, 0.25, 0.75, // sample 0, points 0..3
            0.2, 0.8, 0.6, 0.4, 0.35, 0.65, // sample 1
        ];
        let t = PredictiveTensor::from_probs(probs, 2, 3, 2, vec![10, 11, 12]);
        let s = t.select(&[2, 0]);
        assert_eq!(s.point_ids, vec![12, 10]);
        assert_eq!(s.row(1, 0), &[0.35, 0.65]);
        assert_eq!(s.row(1, 1), &[0.2, 0.8]);
    }
}
