//! Regularized MAP fitting by damped Newton descent.

use nalgebra::DVector;

use crate::bayes::hessian::fisher_hessian_rows;
use crate::bayes::{log_sum_exp, LabeledSet, Prior, WeightPoint};
use crate::error::{Error, Result};
use crate::linalg::spd_cholesky_with_jitter;

pub const MAX_ITERATIONS: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FitReport {
    pub weights: WeightPoint,
    pub iterations: usize,
    pub grad_norm: f64,
}

/// Penalized negative log likelihood:
/// `sum_(x,y) -ln softmax(Wx+b)[y] + |theta|^2 / (2 sigma^2)`.
pub fn map_objective(l: &LabeledSet, point: &WeightPoint, prior: &Prior) -> f64 {
    let mut obj = 0.0;
    for (x, y) in l.examples() {
        let logits = point.logits(x);
        obj += log_sum_exp(logits.as_slice()) - logits[y];
    }
    let theta = point.to_flat();
    obj + theta.norm_squared() / (2.0 * prior.variance())
}

/// Analytic gradient of [`map_objective`] in the flat parameterization.
pub fn map_gradient(l: &LabeledSet, point: &WeightPoint, prior: &Prior) -> DVector<f64> {
    let (c, d) = (point.num_classes(), point.dim());
    let mut grad = point.to_flat() / prior.variance();
    for (x, y) in l.examples() {
        let p = point.probs(x);
        for i in 0..c {
            let r = p[i] - if i == y { 1.0 } else { 0.0 };
            let base = i * (d + 1);
            for (j, &xj) in x.iter().enumerate() {
                grad[base + j] += r * xj;
            }
            grad[base + d] += r;
        }
    }
    grad
}

/// Minimize the MAP objective to gradient norm `tol`, optionally warm-started.
/// The objective is strictly convex (the prior term), so the minimizer is
/// unique and the starting point only affects iteration count.
pub fn map_fit(
    l: &LabeledSet,
    prior: &Prior,
    tol: f64,
    init: Option<&WeightPoint>,
) -> Result<FitReport> {
    assert!(tol > 0.0, "tol must be positive");
    let (c, d) = (l.num_classes(), l.dim());
    let mut point = init.cloned().unwrap_or_else(|| WeightPoint::zeros(c, d));
    let mut obj = map_objective(l, &point, prior);

    for iteration in 0..MAX_ITERATIONS {
        let grad = map_gradient(l, &point, prior);
        let grad_norm = grad.norm();
        if grad_norm <= tol {
            return Ok(FitReport {
                weights: point,
                iterations: iteration,
                grad_norm,
            });
        }

        let hess = fisher_hessian_rows(l.examples().map(|(x, _)| x), &point, prior, true);
        let (chol, _) = spd_cholesky_with_jitter(hess)?;
        let step = -chol.solve(&grad);
        let slope = grad.dot(&step); // negative for a descent direction

        // Armijo backtracking
        let mut t = 1.0;
        let theta = point.to_flat();
        loop {
            let candidate = WeightPoint::from_flat(&(&theta + t * &step), c, d);
            let cand_obj = map_objective(l, &candidate, prior);
            if cand_obj <= obj + 1e-4 * t * slope {
                point = candidate;
                obj = cand_obj;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                // step direction exhausted; gradient test below decides
                point = candidate;
                obj = cand_obj;
                break;
            }
        }
    }

    let grad_norm = map_gradient(l, &point, prior).norm();
    if grad_norm <= tol {
        Ok(FitReport {
            weights: point,
            iterations: MAX_ITERATIONS,
            grad_norm,
        })
    } else {
        Err(Error::NonConvergence {
            iterations: MAX_ITERATIONS,
            grad_norm,
            tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric_pair() -> LabeledSet {
        let mut l = LabeledSet::new(2, 2);
        l.push(&[1.0, 0.5], 0);
        l.push(&[-1.0, -0.5], 1);
        l
    }

    #[test]
    fn empty_set_returns_prior_mode() {
        let l = LabeledSet::new(3, 4);
        let fit = map_fit(&l, &Prior::default(), DEFAULT_TOL, None).unwrap();
        assert_eq!(fit.weights, WeightPoint::zeros(3, 4));
        assert_eq!(fit.iterations, 0);
    }

    #[test]
    fn symmetric_data_gives_symmetric_biases() {
        let fit = map_fit(&symmetric_pair(), &Prior::default(), 1e-10, None).unwrap();
        let b = &fit.weights.b;
        assert!((b[0] - b[1]).abs() < 1e-8, "biases {b:?} not symmetric");
        // decision boundary passes through the origin
        let p = fit.weights.probs(&[0.0, 0.0]);
        assert!((p[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn finite_difference_gradient_is_small_at_the_map() {
        let mut l = LabeledSet::new(2, 2);
        l.push(&[0.3, -1.2], 0);
        l.push(&[1.1, 0.4], 1);
        l.push(&[0.9, 0.9], 1);
        let prior = Prior::new(2.0).unwrap();
        let tol = 1e-9;
        let fit = map_fit(&l, &prior, tol, None).unwrap();

        // central finite differences of the objective, step 1e-5
        let theta = fit.weights.to_flat();
        let h = 1e-5;
        let mut fd = DVector::zeros(theta.len());
        for i in 0..theta.len() {
            let mut plus = theta.clone();
            let mut minus = theta.clone();
            plus[i] += h;
            minus[i] -= h;
            let fp = map_objective(&l, &WeightPoint::from_flat(&plus, 2, 2), &prior);
            let fm = map_objective(&l, &WeightPoint::from_flat(&minus, 2, 2), &prior);
            fd[i] = (fp - fm) / (2.0 * h);
        }
        assert!(
            fd.norm() <= 10.0 * tol.max(1e-8),
            "finite-difference gradient norm {} too large",
            fd.norm()
        );
    }

    #[test]
    fn nonconvergence_reports_gradient_norm() {
        // asymmetric instance so the gradient never cancels to exactly zero
        let mut l = LabeledSet::new(2, 2);
        l.push(&[1.0, 0.3], 0);
        l.push(&[0.9, -0.2], 0);
        l.push(&[-0.5, 0.13], 1);
        let err = map_fit(&l, &Prior::new(0.7).unwrap(), 1e-300, None).unwrap_err();
        match err {
            Error::NonConvergence { grad_norm, .. } => {
                assert!(grad_norm.is_finite());
                assert!(grad_norm > 0.0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
