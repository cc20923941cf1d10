//! Multi-seed comparison suites with the paper-style top marking.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::runner::run_experiment;
use crate::parallel;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SuiteRow {
    pub name: String,
    pub mean_final_accuracy: f64,
    /// Twice the standard error over the repeats.
    pub two_se: f64,
    pub top: bool,
    pub final_accuracies: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SuiteSummary {
    pub repeats: usize,
    pub rows: Vec<SuiteRow>,
}

impl fmt::Display for SuiteSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:>10} {:>10} {:>5}",
            "method", "mean acc", "2se", "top"
        )?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<24} {:>10.4} {:>10.4} {:>5}",
                row.name,
                row.mean_final_accuracy,
                row.two_se,
                if row.top { "*" } else { "" }
            )?;
        }
        Ok(())
    }
}

fn mean_and_two_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 2.0 * (var / n).sqrt())
}

/// Mark a method as top when its mean lies within the 2SE band of the best
/// mean, or the best mean lies within the method's own band (symmetric
/// interval interpretation of the "or vice versa" rule).
pub fn summarize(results: &[(String, Vec<f64>)]) -> Result<SuiteSummary> {
    if results.is_empty() {
        return Err(Error::InvalidConfig("empty suite".into()));
    }
    let repeats = results[0].1.len();
    if repeats < 2 {
        return Err(Error::InvalidConfig(
            "standard errors need at least 2 repeats".into(),
        ));
    }
    if results.iter().any(|(_, v)| v.len() != repeats) {
        return Err(Error::InvalidConfig("ragged suite results".into()));
    }
    let stats: Vec<(f64, f64)> = results.iter().map(|(_, v)| mean_and_two_se(v)).collect();
    let (best_mean, best_pm) = stats
        .iter()
        .copied()
        .max_by(|a, b| a.0.partial_cmp(&b.0).expect("finite means"))
        .expect("nonempty");
    let rows = results
        .iter()
        .zip(&stats)
        .map(|((name, values), &(mean, pm))| SuiteRow {
            name: name.clone(),
            mean_final_accuracy: mean,
            two_se: pm,
            top: best_mean - mean <= best_pm.max(pm),
            final_accuracies: values.clone(),
        })
        .collect();
    Ok(SuiteSummary { repeats, rows })
}

/// Run every config `repeats` times with seeds `seed + r`, then summarize
/// final accuracies. Runs execute concurrently; each is a pure function of
/// its config, so the summary does not depend on scheduling.
pub fn run_suite(configs: &[ExperimentConfig], repeats: usize) -> Result<SuiteSummary> {
    if repeats < 2 {
        return Err(Error::InvalidConfig(
            "standard errors need at least 2 repeats".into(),
        ));
    }
    let jobs: Vec<(usize, ExperimentConfig)> = configs
        .iter()
        .enumerate()
        .flat_map(|(i, config)| {
            (0..repeats).map(move |r| {
                let mut run = config.clone();
                run.seed = config.seed.wrapping_add(r as u64);
                (i, run)
            })
        })
        .collect();
    let outcomes: Vec<(usize, Result<f64>)> = parallel::pool().install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|(i, run)| (*i, run_experiment(run).map(|c| c.final_accuracy())))
            .collect()
    });

    let mut results: Vec<(String, Vec<f64>)> = configs
        .iter()
        .map(|c| (c.algorithm.name().to_string(), Vec::with_capacity(repeats)))
        .collect();
    for (i, outcome) in outcomes {
        results[i].1.push(outcome?);
    }
    summarize(&results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_se_matches_hand_computation() {
        // sample std of [1,2,3,4,5] is sqrt(2.5); 2 se = 2 sqrt(2.5 / 5)
        let values = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (mean, two_se) = mean_and_two_se(&values);
        assert_eq!(mean, 3.0);
        assert!((two_se - 2.0 * (2.5f64 / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_identical_runs_have_zero_se_and_one_top() {
        let summary = summarize(&[
            ("a".into(), vec![0.9, 0.9, 0.9]),
            ("b".into(), vec![0.8, 0.8, 0.8]),
        ])
        .unwrap();
        assert_eq!(summary.rows[0].two_se, 0.0);
        assert!(summary.rows[0].top);
        assert!(!summary.rows[1].top);
    }

    #[test]
    fn overlapping_intervals_are_both_top() {
        let summary = summarize(&[
            ("a".into(), vec![0.90, 0.92]),
            ("b".into(), vec![0.89, 0.91]),
        ])
        .unwrap();
        assert!(summary.rows.iter().all(|r| r.top), "{summary}");
    }

    #[test]
    fn clearly_separated_methods_have_one_top() {
        let summary = summarize(&[
            ("good".into(), vec![0.95, 0.951, 0.949]),
            ("bad".into(), vec![0.5, 0.501, 0.499]),
        ])
        .unwrap();
        assert!(summary.rows[0].top);
        assert!(!summary.rows[1].top);
    }

    #[test]
    fn statistics_are_permutation_invariant_in_seed_order() {
        let a = summarize(&[("x".into(), vec![0.1, 0.5, 0.9])]).unwrap();
        let b = summarize(&[("x".into(), vec![0.9, 0.1, 0.5])]).unwrap();
        assert_eq!(a.rows[0].mean_final_accuracy, b.rows[0].mean_final_accuracy);
        assert_eq!(a.rows[0].two_se, b.rows[0].two_se);
    }

    #[test]
    fn single_repeat_is_rejected() {
        assert!(summarize(&[("x".into(), vec![0.1])]).is_err());
    }
}
