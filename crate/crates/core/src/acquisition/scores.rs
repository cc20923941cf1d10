//! Per-point acquisition scores.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bayes::PredictiveTensor;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    Confidence,
    Bald,
    Epig,
    BaitMarginal,
}

impl std::fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ScoreKind::Confidence => "confidence",
            ScoreKind::Bald => "bald",
            ScoreKind::Epig => "epig",
            ScoreKind::BaitMarginal => "bait-marginal",
        };
        f.write_str(name)
    }
}

/// Acquisition scores over a candidate set, aligned with the candidates'
/// pool ids.
#[derive(Debug, Clone)]
pub struct Scores {
    pub values: Vec<f64>,
    pub kind: ScoreKind,
    pub point_ids: Vec<usize>,
}

impl Scores {
    pub fn new(values: Vec<f64>, kind: ScoreKind, point_ids: Vec<usize>) -> Self {
        assert_eq!(values.len(), point_ids.len());
        assert!(values.iter().all(|v| v.is_finite()), "non-finite score");
        Self {
            values,
            kind,
            point_ids,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Shannon entropy in nats; `0 ln 0` is treated as 0.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum()
}

/// Least-confidence uncertainty: `1 - max_y p[y]`.
pub fn confidence_score(bma_row: &[f64]) -> f64 {
    1.0 - bma_row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Plug-in mutual information between the label at point `i` and the weight
/// samples: `H(mean_j p_j) - mean_j H(p_j)`.
pub fn bald_score(tensor: &PredictiveTensor, i: usize) -> f64 {
    let marginal = entropy(&tensor.bma_row(i));
    let conditional: f64 = (0..tensor.k()).map(|j| entropy(tensor.row(j, i))).sum::<f64>()
        / tensor.k() as f64;
    (marginal - conditional).max(0.0)
}

/// BALD for every point in the tensor.
pub fn bald_scores(tensor: &PredictiveTensor) -> Scores {
    let values = (0..tensor.n_points()).map(|i| bald_score(tensor, i)).collect();
    Scores::new(values, ScoreKind::Bald, tensor.point_ids.clone())
}

/// Confidence for every point.
pub fn confidence_scores(bma_rows: impl Iterator<Item = Vec<f64>>, point_ids: Vec<usize>) -> Scores {
    let values = bma_rows.map(|row| confidence_score(&row)).collect();
    Scores::new(values, ScoreKind::Confidence, point_ids)
}

/// Append scores as CSV rows `point_id,score,kind,iteration`.
pub fn dump_scores_csv<W: Write + ?Sized>(out: &mut W, scores: &Scores, iteration: usize) -> Result<()> {
    for (id, v) in scores.point_ids.iter().zip(&scores.values) {
        writeln!(out, "{id},{v},{kind},{iteration}", kind = scores.kind)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_of_a_fair_coin_is_ln2() {
        assert!((entropy(&[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn entropy_of_a_point_mass_is_zero() {
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
    }

    #[test]
    fn entropy_direct_evaluation() {
        // -0.9 ln 0.9 - 0.1 ln 0.1
        assert!((entropy(&[0.9, 0.1]) - 0.325083).abs() < 1e-6);
    }

    #[test]
    fn confidence_of_uniform_is_one_minus_inverse_c() {
        let c = 5;
        let row = vec![1.0 / c as f64; c];
        assert!((confidence_score(&row) - (1.0 - 1.0 / c as f64)).abs() < 1e-15);
    }

    #[test]
    fn confidence_of_certain_point_is_zero() {
        assert_eq!(confidence_score(&[1.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    fn bald_is_zero_for_a_single_sample() {
        let t = PredictiveTensor::from_probs(vec![0.3, 0.7], 1, 1, 2, vec![0]);
        assert_eq!(bald_score(&t, 0), 0.0);
    }

    #[test]
    fn bald_of_two_certain_opposed_samples_is_ln2() {
        let t = PredictiveTensor::from_probs(vec![1.0, 0.0, 0.0, 1.0], 2, 1, 2, vec![0]);
        assert!((bald_score(&t, 0) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bald_is_zero_when_samples_agree() {
        let t = PredictiveTensor::from_probs(vec![0.2, 0.8, 0.2, 0.8, 0.2, 0.8], 3, 1, 2, vec![0]);
        assert!(bald_score(&t, 0).abs() < 1e-12);
    }

    #[test]
    fn score_dump_format() {
        let s = Scores::new(vec![0.5, 0.25], ScoreKind::Epig, vec![3, 9]);
        let mut buf = Vec::new();
        dump_scores_csv(&mut buf, &s, 7).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3,0.5,epig,7\n9,0.25,epig,7\n");
    }
}
