//! Monte Carlo Bayesian model averaging.

use crate::bayes::{PosteriorEnsemble, PredictiveTensor};
use crate::dataset::FeatureMatrix;

/// Model-averaged class probabilities, one simplex row per point.
#[derive(Debug, Clone, PartialEq)]
pub struct BmaMatrix {
    data: Vec<f64>,
    n: usize,
    c: usize,
}

impl BmaMatrix {
    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.c
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.c..(i + 1) * self.c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.c)
    }
}

#[derive(Debug, Clone)]
pub struct Predictions {
    pub tensor: PredictiveTensor,
    pub bma: BmaMatrix,
}

/// Per-sample predictives and their average over the ensemble.
pub fn predict(ensemble: &PosteriorEnsemble, points: &FeatureMatrix) -> Predictions {
    predict_with_ids(ensemble, points, &(0..points.n_rows()).collect::<Vec<_>>())
}

/// Like [`predict`] but tagging tensor rows with caller-side point ids.
pub fn predict_with_ids(
    ensemble: &PosteriorEnsemble,
    points: &FeatureMatrix,
    point_ids: &[usize],
) -> Predictions {
    let k = ensemble.k();
    let n = points.n_rows();
    let c = ensemble.num_classes();
    assert_eq!(point_ids.len(), n);

    let mut probs = vec![0.0; k * n * c];
    for (j, sample) in ensemble.samples().iter().enumerate() {
        for (i, x) in points.rows().enumerate() {
            let p = sample.probs(x);
            probs[(j * n + i) * c..(j * n + i + 1) * c].copy_from_slice(&p);
        }
    }

    let mut bma = vec![0.0; n * c];
    for j in 0..k {
        for i in 0..n {
            let base = (j * n + i) * c;
            for y in 0..c {
                bma[i * c + y] += probs[base + y];
            }
        }
    }
    for v in &mut bma {
        *v /= k as f64;
    }

    Predictions {
        tensor: PredictiveTensor::from_probs(probs, k, n, c, point_ids.to_vec()),
        bma: BmaMatrix { data: bma, n, c },
    }
}
