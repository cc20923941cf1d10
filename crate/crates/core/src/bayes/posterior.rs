//! Laplace-approximate posterior: Gaussian centered at the MAP with the
//! inverse penalized Hessian as covariance, sampled deterministically.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::bayes::fit::map_fit;
use crate::bayes::hessian::fisher_hessian_rows;
use crate::bayes::{LabeledSet, Prior, WeightPoint};
use crate::error::Result;
use crate::linalg::{spd_cholesky_with_jitter, spd_inverse, symmetrize};
use crate::rng::{self, TAG_POSTERIOR};

/// MAP point, Laplace covariance over the flat parameters, and `k` Gaussian
/// weight samples. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorEnsemble {
    pub map: WeightPoint,
    pub covariance: DMatrix<f64>,
    samples: Vec<WeightPoint>,
    pub seed: u64,
    pub fit_iterations: usize,
}

impl PosteriorEnsemble {
    /// Ensemble carrying explicitly provided weight samples: the map is the
    /// first sample and the covariance is zero. Useful wherever only the
    /// samples matter (hand-built predictive tensors in tests and tools).
    pub fn from_samples(samples: Vec<WeightPoint>) -> Self {
        assert!(!samples.is_empty());
        let p = samples[0].n_params();
        Self {
            map: samples[0].clone(),
            covariance: DMatrix::zeros(p, p),
            samples,
            seed: 0,
            fit_iterations: 0,
        }
    }

    pub fn k(&self) -> usize {
        self.samples.len()
    }

    pub fn samples(&self) -> &[WeightPoint] {
        &self.samples
    }

    pub fn num_classes(&self) -> usize {
        self.map.num_classes()
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// JSON form with every numeric field written to 17 significant digits,
    /// enough to round-trip f64 exactly. Samples are not stored; they are
    /// regenerated from the seed on load.
    pub fn to_json(&self) -> String {
        let num = |v: f64| format!("{v:.16e}");
        let row_json = |row: &[f64]| {
            let cells: Vec<String> = row.iter().map(|&v| num(v)).collect();
            format!("[{}]", cells.join(","))
        };
        let w_rows: Vec<String> = (0..self.map.num_classes())
            .map(|i| {
                let row: Vec<f64> = self.map.w.row(i).iter().copied().collect();
                row_json(&row)
            })
            .collect();
        let b = row_json(self.map.b.as_slice());
        let cov_rows: Vec<String> = (0..self.covariance.nrows())
            .map(|i| {
                let row: Vec<f64> = self.covariance.row(i).iter().copied().collect();
                row_json(&row)
            })
            .collect();
        format!(
            "{{\"map\":{{\"w\":[{}],\"b\":{}}},\"covariance\":[{}],\"seed\":{},\"k\":{}}}",
            w_rows.join(","),
            b,
            cov_rows.join(","),
            self.seed,
            self.k()
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct MapJson {
            w: Vec<Vec<f64>>,
            b: Vec<f64>,
        }
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct EnsembleJson {
            map: MapJson,
            covariance: Vec<Vec<f64>>,
            seed: u64,
            k: usize,
        }
        let parsed: EnsembleJson = serde_json::from_str(text)?;
        let c = parsed.map.w.len();
        let d = parsed.map.w.first().map_or(0, Vec::len);
        let mut w = DMatrix::zeros(c, d);
        for (i, row) in parsed.map.w.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                w[(i, j)] = v;
            }
        }
        let map = WeightPoint {
            w,
            b: DVector::from_vec(parsed.map.b),
        };
        let p = c * (d + 1);
        let mut covariance = DMatrix::zeros(p, p);
        for (i, row) in parsed.covariance.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                covariance[(i, j)] = v;
            }
        }
        let samples = sample_gaussian(&map, &covariance, parsed.k, parsed.seed)?;
        Ok(Self {
            map,
            covariance,
            samples,
            seed: parsed.seed,
            fit_iterations: 0,
        })
    }
}

fn sample_gaussian(
    map: &WeightPoint,
    covariance: &DMatrix<f64>,
    k: usize,
    seed: u64,
) -> Result<Vec<WeightPoint>> {
    let (c, d) = (map.num_classes(), map.dim());
    let p = map.n_params();
    let (chol, _) = spd_cholesky_with_jitter(covariance.clone())?;
    let l = chol.l();
    let mean = map.to_flat();
    let mut rng = rng::stream(seed, &[TAG_POSTERIOR]);
    let mut samples = Vec::with_capacity(k);
    for _ in 0..k {
        let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        samples.push(WeightPoint::from_flat(&(&mean + &l * z), c, d));
    }
    Ok(samples)
}

fn build(l: &LabeledSet, prior: &Prior, k: usize, seed: u64, warm: Option<&WeightPoint>, tol: f64) -> Result<PosteriorEnsemble> {
    assert!(k >= 1, "k must be at least 1");
    let fit = map_fit(l, prior, tol, warm)?;
    let hess = fisher_hessian_rows(l.examples().map(|(x, _)| x), &fit.weights, prior, true);
    let covariance = symmetrize(&spd_inverse(hess)?);
    let samples = sample_gaussian(&fit.weights, &covariance, k, seed)?;
    Ok(PosteriorEnsemble {
        map: fit.weights,
        covariance,
        samples,
        seed,
        fit_iterations: fit.iterations,
    })
}

/// Fit the MAP on `l` and sample `k` weights from the Laplace posterior.
pub fn laplace_posterior(
    l: &LabeledSet,
    prior: &Prior,
    k: usize,
    seed: u64,
    tol: f64,
) -> Result<PosteriorEnsemble> {
    build(l, prior, k, seed, None, tol)
}

/// Posterior after adding one labeled point. Warm-started from the previous
/// MAP but equivalent to a cold [`laplace_posterior`] on `l + extra` at the
/// same tolerance.
pub fn refit_with(
    previous: &PosteriorEnsemble,
    l: &LabeledSet,
    extra_x: &[f64],
    extra_y: usize,
    prior: &Prior,
    k: usize,
    seed: u64,
    tol: f64,
) -> Result<PosteriorEnsemble> {
    let extended = l.with_extra(extra_x, extra_y);
    build(&extended, prior, k, seed, Some(&previous.map), tol)
}
