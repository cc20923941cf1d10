//! Gauss-Newton / Fisher Hessian of the multinomial logistic loss.
//!
//! The Hessian is label-free: `sum_x (diag(p_x) - p_x p_x^T) (x) z z^T`
//! with `z = [x; 1]`, plus the prior precision `I / sigma^2` when included.

use nalgebra::DMatrix;

use crate::bayes::{Prior, WeightPoint};
use crate::dataset::FeatureMatrix;

/// Fisher block contributed by one point, added into `out` (P x P).
pub(crate) fn add_fisher_block(out: &mut DMatrix<f64>, x: &[f64], point: &WeightPoint) {
    let (c, d) = (point.num_classes(), point.dim());
    let p = point.probs(x);
    // class factor A[i,j] = p_i (delta_ij - p_j); z factor z z^T with z = [x; 1]
    for i in 0..c {
        for j in 0..c {
            let a = p[i] * (if i == j { 1.0 } else { 0.0 } - p[j]);
            if a == 0.0 {
                continue;
            }
            let (bi, bj) = (i * (d + 1), j * (d + 1));
            for (ai, &xi) in x.iter().enumerate() {
                for (aj, &xj) in x.iter().enumerate() {
                    out[(bi + ai, bj + aj)] += a * xi * xj;
                }
                out[(bi + ai, bj + d)] += a * xi;
                out[(bi + d, bj + ai)] += a * xi;
            }
            out[(bi + d, bj + d)] += a;
        }
    }
}

/// Fisher block of a single point as a standalone P x P matrix.
pub fn fisher_block(x: &[f64], point: &WeightPoint) -> DMatrix<f64> {
    let n = point.n_params();
    let mut out = DMatrix::zeros(n, n);
    add_fisher_block(&mut out, x, point);
    out
}

pub(crate) fn fisher_hessian_rows<'a>(
    rows: impl Iterator<Item = &'a [f64]>,
    point: &WeightPoint,
    prior: &Prior,
    include_prior: bool,
) -> DMatrix<f64> {
    let n = point.n_params();
    let mut out = DMatrix::zeros(n, n);
    for x in rows {
        add_fisher_block(&mut out, x, point);
    }
    if include_prior {
        for i in 0..n {
            out[(i, i)] += prior.precision();
        }
    }
    out
}

/// Hessian of the penalized negative log likelihood over `points`,
/// evaluated at `probs_at`. Labels never enter.
pub fn hessian(
    points: &FeatureMatrix,
    probs_at: &WeightPoint,
    prior: &Prior,
    include_prior: bool,
) -> DMatrix<f64> {
    fisher_hessian_rows(points.rows(), probs_at, prior, include_prior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::{map_objective, LabeledSet};
    use nalgebra::DVector;

    #[test]
    fn empty_points_with_prior_is_scaled_identity() {
        let wp = WeightPoint::zeros(2, 2);
        let prior = Prior::new(4.0).unwrap();
        let m = FeatureMatrix::new(vec![], 0, 2, vec!["a".into(), "b".into()]);
        let h = hessian(&m, &wp, &prior, true);
        assert_eq!(h, DMatrix::identity(6, 6) * 0.25);
    }

    #[test]
    fn matches_finite_difference_hessian() {
        // second central differences of the NLL objective, step 1e-3
        let (c, d) = (2, 2);
        let mut wp = WeightPoint::zeros(c, d);
        wp.w[(0, 0)] = 0.7;
        wp.w[(0, 1)] = -0.3;
        wp.w[(1, 0)] = -0.2;
        wp.b[0] = 0.4;
        let prior = Prior::default();

        let mut l = LabeledSet::new(c, d);
        l.push(&[0.8, -0.5], 0);
        l.push(&[-0.3, 0.9], 1);

        let m = FeatureMatrix::from_rows(
            &[vec![0.8, -0.5], vec![-0.3, 0.9]],
            vec!["a".into(), "b".into()],
        );
        let analytic = hessian(&m, &wp, &prior, true);

        let theta = wp.to_flat();
        let n = theta.len();
        let h = 1e-3;
        let f = |t: &DVector<f64>| map_objective(&l, &WeightPoint::from_flat(t, c, d), &prior);
        for i in 0..n {
            for j in 0..n {
                let mut pp = theta.clone();
                let mut pm = theta.clone();
                let mut mp = theta.clone();
                let mut mm = theta.clone();
                pp[i] += h;
                pp[j] += h;
                pm[i] += h;
                pm[j] -= h;
                mp[i] -= h;
                mp[j] += h;
                mm[i] -= h;
                mm[j] -= h;
                let fd = (f(&pp) - f(&pm) - f(&mp) + f(&mm)) / (4.0 * h * h);
                assert!(
                    (fd - analytic[(i, j)]).abs() < 1e-5,
                    "H[{i},{j}] analytic {} vs fd {}",
                    analytic[(i, j)],
                    fd
                );
            }
        }
    }

    #[test]
    fn binary_point_block_matches_p_one_minus_p_form() {
        // in the 1-logit coordinate (difference of the two class blocks),
        // the data block is p(1-p) z z^T
        let (c, d) = (2, 2);
        let mut wp = WeightPoint::zeros(c, d);
        wp.w[(0, 0)] = 1.1;
        wp.b[1] = -0.4;
        let x = [0.5, -1.5];
        let p = wp.probs(&x)[0];
        let block = fisher_block(&x, &wp);
        let z = [x[0], x[1], 1.0];
        for a in 0..3 {
            for b in 0..3 {
                let expect = p * (1.0 - p) * z[a] * z[b];
                // top-left class block carries + p(1-p) z z^T
                assert!((block[(a, b)] - expect).abs() < 1e-12);
                // cross-class block carries the negated form
                assert!((block[(a, 3 + b)] + expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hessian_is_label_free() {
        let m = FeatureMatrix::from_rows(
            &[vec![0.8, -0.5], vec![-0.3, 0.9]],
            vec!["a".into(), "b".into()],
        );
        let mut wp = WeightPoint::zeros(2, 2);
        wp.w[(0, 1)] = 0.9;
        let prior = Prior::default();
        // no labels appear anywhere in the signature; permuting rows is the
        // only relabeling-adjacent operation, and the sum is unchanged
        let swapped = FeatureMatrix::from_rows(
            &[vec![-0.3, 0.9], vec![0.8, -0.5]],
            vec!["a".into(), "b".into()],
        );
        let h1 = hessian(&m, &wp, &prior, false);
        let h2 = hessian(&swapped, &wp, &prior, false);
        assert!((h1 - h2).abs().max() < 1e-12);
    }
}
