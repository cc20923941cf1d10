//! Plug-in mutual-information estimators: pairwise MI, EPIG, and the joint
//! batch form used by BatchBALD.

use crate::acquisition::scores::entropy;
use crate::bayes::{predict_with_ids, PosteriorEnsemble, PredictiveTensor};
use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::parallel;
use crate::rng::{self, TAG_VAL_SUBSAMPLE};

/// Budget on label configurations for joint-entropy computations.
pub const JOINT_CAP: usize = 4096;

/// Joint label distribution over a small set of points, built as the mean
/// over weight samples of the per-sample product predictive. Configurations
/// are laid out odometer-style with the first point most significant.
#[derive(Debug, Clone)]
pub struct JointPredictive {
    probs: Vec<f64>,
    num_points: usize,
    num_classes: usize,
}

impl JointPredictive {
    /// Joint over the tensor points at local indices `points`.
    pub fn build(tensor: &PredictiveTensor, points: &[usize]) -> Result<Self> {
        let c = tensor.num_classes();
        let configs = c
            .checked_pow(points.len() as u32)
            .filter(|&n| n <= JOINT_CAP)
            .ok_or(Error::JointTooLarge {
                configs: c.pow(points.len().min(16) as u32),
                cap: JOINT_CAP,
            })?;
        let mut probs = vec![0.0; configs];
        let mut scratch = Vec::with_capacity(configs);
        for j in 0..tensor.k() {
            scratch.clear();
            scratch.push(1.0);
            for &i in points {
                let row = tensor.row(j, i);
                let mut next = Vec::with_capacity(scratch.len() * c);
                for &base in &scratch {
                    for &p in row {
                        next.push(base * p);
                    }
                }
                scratch = next;
            }
            for (acc, v) in probs.iter_mut().zip(&scratch) {
                *acc += v;
            }
        }
        let k = tensor.k() as f64;
        for p in &mut probs {
            *p /= k;
        }
        Ok(Self {
            probs,
            num_points: points.len(),
            num_classes: c,
        })
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Marginal of the point at position `pos`.
    pub fn marginal(&self, pos: usize) -> Vec<f64> {
        let c = self.num_classes;
        let inner: usize = c.pow((self.num_points - 1 - pos) as u32);
        let mut out = vec![0.0; c];
        for (config, &p) in self.probs.iter().enumerate() {
            out[(config / inner) % c] += p;
        }
        out
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }
}

/// Plug-in mutual information between the labels of two tensor points.
/// Computed as the KL of the joint against the product of its own
/// marginals, so the value is non-negative up to rounding (clamped at 0).
pub fn pairwise_mi(tensor: &PredictiveTensor, a: usize, b: usize) -> f64 {
    let c = tensor.num_classes();
    let k = tensor.k();
    let mut joint = vec![0.0; c * c];
    for j in 0..k {
        let pa = tensor.row(j, a);
        let pb = tensor.row(j, b);
        for (ya, &va) in pa.iter().enumerate() {
            for (yb, &vb) in pb.iter().enumerate() {
                joint[ya * c + yb] += va * vb;
            }
        }
    }
    let kf = k as f64;
    for v in &mut joint {
        *v /= kf;
    }
    mi_of_joint(&joint, c)
}

pub(crate) fn mi_of_joint(joint: &[f64], c: usize) -> f64 {
    let mut ma = vec![0.0; c];
    let mut mb = vec![0.0; c];
    for ya in 0..c {
        for yb in 0..c {
            let p = joint[ya * c + yb];
            ma[ya] += p;
            mb[yb] += p;
        }
    }
    let mut mi = 0.0;
    for ya in 0..c {
        for yb in 0..c {
            let p = joint[ya * c + yb];
            if p > 0.0 {
                mi += p * (p / (ma[ya] * mb[yb])).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Mean over validation points of the pairwise MI against each candidate.
/// `cand` and `val` must come from the same ensemble.
pub fn epig_scores_from_tensors(cand: &PredictiveTensor, val: &PredictiveTensor) -> Vec<f64> {
    assert_eq!(cand.k(), val.k(), "tensors from different ensembles");
    let nv = val.n_points();
    parallel::pool().install(|| {
        use rayon::prelude::*;
        (0..cand.n_points())
            .into_par_iter()
            .map(|a| {
                let mut total = 0.0;
                for v in 0..nv {
                    total += pairwise_mi_cross(cand, a, val, v);
                }
                total / nv as f64
            })
            .collect()
    })
}

/// Pairwise MI where the two points live in different tensors sharing the
/// same weight samples.
pub fn pairwise_mi_cross(
    ta: &PredictiveTensor,
    a: usize,
    tb: &PredictiveTensor,
    b: usize,
) -> f64 {
    let c = ta.num_classes();
    let k = ta.k();
    let mut joint = vec![0.0; c * c];
    for j in 0..k {
        let pa = ta.row(j, a);
        let pb = tb.row(j, b);
        for (ya, &va) in pa.iter().enumerate() {
            for (yb, &vb) in pb.iter().enumerate() {
                joint[ya * c + yb] += va * vb;
            }
        }
    }
    let kf = k as f64;
    for v in &mut joint {
        *v /= kf;
    }
    mi_of_joint(&joint, c)
}

/// Validation indices used for an EPIG evaluation: `take` of them, uniform
/// without replacement, or the identity order when `take >= |V|`.
pub fn validation_subsample(n_val: usize, take: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::stream(seed, &[TAG_VAL_SUBSAMPLE]);
    rng::sample_without_replacement(&mut rng, n_val, take)
}

/// Expected predictive information gain of one candidate: the mean over a
/// (possibly subsampled) validation set of `I(Y_x; Y_candidate)`.
pub fn epig_score(
    ensemble: &PosteriorEnsemble,
    candidate: &[f64],
    validation: &FeatureMatrix,
    val_subsample: usize,
    seed: u64,
) -> f64 {
    assert!(validation.n_rows() > 0, "validation set must be nonempty");
    let keep = validation_subsample(validation.n_rows(), val_subsample, seed);
    let val = validation.gather(&keep);
    let cand = FeatureMatrix::from_rows(&[candidate.to_vec()], validation.feature_names.clone());
    let cand_pred = predict_with_ids(ensemble, &cand, &[0]);
    let val_pred = predict_with_ids(ensemble, &val, &keep);
    epig_scores_from_tensors(&cand_pred.tensor, &val_pred.tensor)[0]
}

/// Plug-in `I(Y_batch; W)` over all points of `tensor`: joint entropy of the
/// mean product predictive minus the mean per-sample sum of entropies.
pub fn batchbald_joint_mi(tensor: &PredictiveTensor) -> Result<f64> {
    let points: Vec<usize> = (0..tensor.n_points()).collect();
    let joint = JointPredictive::build(tensor, &points)?;
    let mut conditional = 0.0;
    for j in 0..tensor.k() {
        for &i in &points {
            conditional += entropy(tensor.row(j, i));
        }
    }
    conditional /= tensor.k() as f64;
    Ok((joint.entropy() - conditional).max(0.0))
}

/// Greedy BatchBALD over the tensor's points. Maintains the per-sample
/// product over committed configurations; each step costs
/// `O(k * c^(|S|+1))` per candidate and errors beyond [`JOINT_CAP`].
pub fn batchbald_greedy(tensor: &PredictiveTensor, batch: usize) -> Result<Vec<usize>> {
    let n = tensor.n_points();
    let c = tensor.num_classes();
    let k = tensor.k();
    if batch > n {
        return Err(Error::PoolExhausted {
            needed: batch,
            available: n,
        });
    }

    // committed[j] holds sample j's product over chosen-point configurations
    let mut committed: Vec<Vec<f64>> = vec![vec![1.0]; k];
    let mut committed_entropy = vec![0.0; k]; // sum of per-point entropies
    let mut chosen: Vec<usize> = Vec::with_capacity(batch);
    let mut remaining: Vec<usize> = (0..n).collect();

    for _ in 0..batch {
        let configs = committed[0].len() * c;
        if configs > JOINT_CAP {
            return Err(Error::JointTooLarge {
                configs,
                cap: JOINT_CAP,
            });
        }
        let scores: Vec<f64> = parallel::pool().install(|| {
            use rayon::prelude::*;
            remaining
                .par_iter()
                .map(|&cand| {
                    let mut joint = vec![0.0; configs];
                    let mut cond = 0.0;
                    for j in 0..k {
                        let row = tensor.row(j, cand);
                        for (cfg, &base) in committed[j].iter().enumerate() {
                            for (y, &p) in row.iter().enumerate() {
                                joint[cfg * c + y] += base * p;
                            }
                        }
                        cond += committed_entropy[j] + entropy(row);
                    }
                    for v in &mut joint {
                        *v /= k as f64;
                    }
                    (entropy(&joint) - cond / k as f64).max(0.0)
                })
                .collect()
        });
        let best = argmax_lowest_index(&scores);
        let point = remaining.remove(best);
        for j in 0..k {
            let row = tensor.row(j, point);
            let mut next = Vec::with_capacity(committed[j].len() * c);
            for &base in &committed[j] {
                for &p in row {
                    next.push(base * p);
                }
            }
            committed[j] = next;
            committed_entropy[j] += entropy(row);
        }
        chosen.push(point);
    }
    Ok(chosen)
}

pub(crate) fn argmax_lowest_index(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
