//! Synthetic ground-truth problems for desk-scale tests.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::preprocess::FeatureMatrix;
use crate::dataset::scenario::Scenario;
use crate::error::{Error, Result};
use crate::rng::{self, TAG_SYNTH_FEATURES, TAG_SYNTH_LABELS};

/// A known logistic data-generating process: spherical Gaussian features,
/// labels drawn from `softmax(W* x + b* + ln priors)`. With `W* = 0` and
/// `b* = 0` the label marginal is exactly `class_priors`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    /// True weights, `num_classes` rows of `dim` entries.
    pub true_weights: Vec<Vec<f64>>,
    pub true_bias: Vec<f64>,
    pub class_priors: Vec<f64>,
    pub n_pool: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Standard deviation of the spherical Gaussian features.
    #[serde(default = "default_feature_scale")]
    pub feature_scale: f64,
}

fn default_feature_scale() -> f64 {
    1.0
}

impl SyntheticSpec {
    pub fn num_classes(&self) -> usize {
        self.true_weights.len()
    }

    pub fn dim(&self) -> usize {
        self.true_weights.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.num_classes();
        let d = self.dim();
        if c < 2 || d == 0 {
            return Err(Error::InvalidConfig(
                "synthetic spec needs >= 2 classes and >= 1 feature".into(),
            ));
        }
        if self.true_weights.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidConfig("ragged true_weights".into()));
        }
        if self.true_bias.len() != c || self.class_priors.len() != c {
            return Err(Error::InvalidConfig(
                "true_bias and class_priors must have one entry per class".into(),
            ));
        }
        let sum: f64 = self.class_priors.iter().sum();
        if self.class_priors.iter().any(|&p| p <= 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(
                "class_priors must be positive and sum to 1".into(),
            ));
        }
        if self.n_pool == 0 || self.n_val == 0 || self.n_test == 0 {
            return Err(Error::InvalidConfig("split counts must be positive".into()));
        }
        if self.feature_scale <= 0.0 || !self.feature_scale.is_finite() {
            return Err(Error::InvalidConfig("feature_scale must be positive".into()));
        }
        Ok(())
    }

    /// True class probabilities at `x`.
    pub fn true_probs(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = (0..self.num_classes())
            .map(|i| {
                let wx: f64 = self.true_weights[i].iter().zip(x).map(|(w, v)| w * v).sum();
                wx + self.true_bias[i] + self.class_priors[i].ln()
            })
            .collect();
        softmax(&logits)
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / z).collect()
}

fn draw_label<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Draw a full scenario from the spec, deterministically per seed. The
/// initial labeled set is left empty; the harness fills it.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Scenario> {
    spec.validate()?;
    let d = spec.dim();

    let make_part = |part_tag: u64, n: usize, with_labels: bool| {
        let mut frng = rng::stream(seed, &[TAG_SYNTH_FEATURES, part_tag]);
        let mut lrng = rng::stream(seed, &[TAG_SYNTH_LABELS, part_tag]);
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(if with_labels { n } else { 0 });
        for _ in 0..n {
            let row: Vec<f64> = (0..d)
                .map(|_| spec.feature_scale * frng.sample::<f64, _>(StandardNormal))
                .collect();
            if with_labels {
                labels.push(draw_label(&spec.true_probs(&row), &mut lrng));
            }
            data.extend_from_slice(&row);
        }
        let names = (0..d).map(|j| format!("x{j}")).collect();
        (FeatureMatrix::new(data, n, d, names), labels)
    };

    let (pool, pool_labels) = make_part(0, spec.n_pool, true);
    let (validation, _) = make_part(1, spec.n_val, false);
    let (test, test_labels) = make_part(2, spec.n_test, true);

    Scenario::new(
        spec.num_classes(),
        pool,
        pool_labels,
        validation,
        test,
        test_labels,
        Vec::new(),
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_spec(c: usize, d: usize, n: usize) -> SyntheticSpec {
        SyntheticSpec {
            true_weights: vec![vec![0.0; d]; c],
            true_bias: vec![0.0; c],
            class_priors: vec![1.0 / c as f64; c],
            n_pool: n,
            n_val: 10,
            n_test: 10,
            feature_scale: 1.0,
        }
    }

    #[test]
    fn zero_weights_give_uniform_label_frequencies() {
        // binomial CI oracle: each class frequency within 3 sigma of 1/c
        let c = 4;
        let n = 10_000;
        let scenario = generate_synthetic(&uniform_spec(c, 3, n), 42).unwrap();
        let mut counts = vec![0usize; c];
        for i in 0..n {
            counts[scenario.oracle().reveal(i)] += 1;
        }
        let p = 1.0 / c as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        for &count in &counts {
            let freq = count as f64 / n as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "class frequency {freq} outside 3 sigma of {p}"
            );
        }
    }

    #[test]
    fn same_seed_gives_identical_scenarios() {
        let spec = uniform_spec(2, 2, 100);
        let a = generate_synthetic(&spec, 7).unwrap();
        let b = generate_synthetic(&spec, 7).unwrap();
        assert_eq!(a.pool, b.pool);
        assert_eq!(a.test, b.test);
        assert_eq!(a.test_labels(), b.test_labels());
        let labels_a: Vec<usize> = (0..100).map(|i| a.oracle().reveal(i)).collect();
        let labels_b: Vec<usize> = (0..100).map(|i| b.oracle().reveal(i)).collect();
        assert_eq!(labels_a, labels_b);
    }

    #[test]
    fn strong_weights_are_nearly_separable() {
        // evaluate the true model on the generated test set
        let spec = SyntheticSpec {
            true_weights: vec![vec![20.0, 0.0], vec![-20.0, 0.0]],
            true_bias: vec![0.0, 0.0],
            class_priors: vec![0.5, 0.5],
            n_pool: 10,
            n_val: 10,
            n_test: 2000,
            feature_scale: 1.0,
        };
        let scenario = generate_synthetic(&spec, 3).unwrap();
        let correct = scenario
            .test
            .rows()
            .zip(scenario.test_labels())
            .filter(|(x, &y)| {
                let p = spec.true_probs(x);
                let argmax = if p[0] >= p[1] { 0 } else { 1 };
                argmax == y
            })
            .count();
        let acc = correct as f64 / 2000.0;
        assert!(acc > 0.95, "Bayes accuracy {acc} not > 0.95");
    }

    #[test]
    fn priors_shift_the_marginal() {
        let spec = SyntheticSpec {
            class_priors: vec![0.1, 0.9],
            ..uniform_spec(2, 2, 10_000)
        };
        let scenario = generate_synthetic(&spec, 11).unwrap();
        let ones = (0..10_000).filter(|&i| scenario.oracle().reveal(i) == 1).count();
        let freq = ones as f64 / 10_000.0;
        assert!((freq - 0.9).abs() < 0.02, "marginal {freq} far from 0.9");
    }

    #[test]
    fn invalid_priors_are_rejected() {
        let mut spec = uniform_spec(2, 2, 10);
        spec.class_priors = vec![0.5, 0.6];
        assert!(generate_synthetic(&spec, 0).is_err());
    }
}
