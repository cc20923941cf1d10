//! Batch selection rules: top-B and the Gumbel-noise stochastic variants.

use serde::{Deserialize, Serialize};

use crate::acquisition::scores::Scores;
use crate::error::{Error, Result};
use crate::rng::{self, gumbel, TAG_GUMBEL};

/// Positions of the `b` highest scores, sorted by descending score with
/// ties broken toward the lowest position.
pub fn select_top_b(scores: &Scores, b: usize) -> Result<Vec<usize>> {
    top_b_of(&scores.values, b)
}

fn top_b_of(values: &[f64], b: usize) -> Result<Vec<usize>> {
    if b > values.len() {
        return Err(Error::PoolExhausted {
            needed: b,
            available: values.len(),
        });
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .partial_cmp(&values[i])
            .expect("finite scores")
            .then(i.cmp(&j))
    });
    order.truncate(b);
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StochasticVariant {
    /// Keys `ln s_i + g_i / beta`; draws follow `s^beta` for B = 1.
    Power,
    /// Keys `s_i / beta + g_i`; softmax sampling at temperature beta.
    Softmax,
    /// Keys `-ln(rank_i) + g_i / beta`, rank 1 = highest score.
    SoftRank,
}

/// Top-B of Gumbel-perturbed keys, deterministic per seed. The per-point
/// noise comes from a substream keyed by the point's position, so the
/// result does not depend on evaluation order.
pub fn select_stochastic(
    scores: &Scores,
    b: usize,
    variant: StochasticVariant,
    beta: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    select_stochastic_with_noise(scores, b, variant, beta, seed, true)
}

/// [`select_stochastic`] with a switch to zero out the Gumbel noise
/// (the `beta -> infinity` limit), which reproduces plain top-B.
pub fn select_stochastic_with_noise(
    scores: &Scores,
    b: usize,
    variant: StochasticVariant,
    beta: f64,
    seed: u64,
    noise: bool,
) -> Result<Vec<usize>> {
    if !(beta > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "stochastic selection needs beta > 0, got {beta}"
        )));
    }
    let n = scores.len();
    if b > n {
        return Err(Error::PoolExhausted {
            needed: b,
            available: n,
        });
    }
    let g = |i: usize| {
        if noise {
            gumbel(&mut rng::stream(seed, &[TAG_GUMBEL, i as u64]))
        } else {
            0.0
        }
    };
    let keys: Vec<f64> = match variant {
        StochasticVariant::Power => scores
            .values
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let s = if s <= 0.0 {
                    log::warn!("power variant clamping non-positive score {s} at position {i}");
                    1e-12
                } else {
                    s
                };
                s.ln() + g(i) / beta
            })
            .collect(),
        StochasticVariant::Softmax => scores
            .values
            .iter()
            .enumerate()
            .map(|(i, &s)| s / beta + g(i))
            .collect(),
        StochasticVariant::SoftRank => {
            // rank 1 = best, ties resolved toward the lowest position
            let order = top_b_of(&scores.values, n)?;
            let mut rank = vec![0usize; n];
            for (r, &pos) in order.iter().enumerate() {
                rank[pos] = r + 1;
            }
            (0..n).map(|i| -(rank[i] as f64).ln() + g(i) / beta).collect()
        }
    };
    top_b_of(&keys, b)
}
