//! The active-learning iteration loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    bald_scores, confidence_scores, epig_scores_from_tensors, select_stochastic, select_top_b,
    validation_subsample, ScoreKind, Scores,
};
use crate::bait::bait_greedy;
use crate::bayes::fit::DEFAULT_TOL;
use crate::bayes::{laplace_posterior, predict_with_ids, LabeledSet, PosteriorEnsemble, Prior};
use crate::dataset::{generate_synthetic, import_scenario, FeatureMatrix, Scenario};
use crate::error::{Error, Result};
use crate::harness::config::{Algorithm, ExperimentConfig, ScenarioSource};
use crate::parbals::{
    parbals_select, FitSettings, ParbalsConfig, ParbalsStep, ParbalsVariant,
};
use crate::rng::{self, TAG_INIT_LABELED, TAG_ITERATION, TAG_RANDOM_BASELINE};

/// One line of the result JSONL. Wall time is kept in memory but never
/// serialized so that reruns stay byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IterationRecord {
    pub kind: String,
    pub iteration: usize,
    pub labeled_count: usize,
    pub test_accuracy: f64,
    pub test_mean_nll: f64,
    pub selected_ids: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parbals_steps: Option<Vec<ParbalsStep>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bait_objectives: Option<Vec<f64>>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub kind: String,
    pub algorithm: String,
    pub t: usize,
    pub b: usize,
    pub k: usize,
    pub seed: u64,
    pub final_accuracy: f64,
    pub final_mean_nll: f64,
    pub final_labeled_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub records: Vec<IterationRecord>,
    pub summary: RunSummary,
}

impl LearningCurve {
    /// One JSON object per iteration record, then the summary line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for record in &self.records {
            out.push_str(&serde_json::to_string(record).expect("serializable record"));
            out.push('\n');
        }
        out.push_str(&serde_json::to_string(&self.summary).expect("serializable summary"));
        out.push('\n');
        out
    }

    pub fn final_accuracy(&self) -> f64 {
        self.summary.final_accuracy
    }
}

/// Accuracy (argmax of the BMA, ties toward the lowest class) and mean
/// negative log likelihood with probabilities clamped at 1e-12.
pub fn evaluate(
    ensemble: &PosteriorEnsemble,
    test: &FeatureMatrix,
    test_labels: &[usize],
) -> Result<(f64, f64)> {
    if test.n_rows() == 0 {
        return Err(Error::InvalidConfig("test set is empty".into()));
    }
    let ids: Vec<usize> = (0..test.n_rows()).collect();
    let pred = predict_with_ids(ensemble, test, &ids);
    let mut correct = 0usize;
    let mut nll = 0.0;
    for (i, &y) in test_labels.iter().enumerate() {
        let row = pred.bma.row(i);
        let mut argmax = 0;
        for (c, &p) in row.iter().enumerate().skip(1) {
            if p > row[argmax] {
                argmax = c;
            }
        }
        if argmax == y {
            correct += 1;
        }
        nll += -(row[y].max(1e-12)).ln();
    }
    let n = test_labels.len() as f64;
    Ok((correct as f64 / n, nll / n))
}

struct SelectionOutcome {
    ids: Vec<usize>,
    parbals_steps: Option<Vec<ParbalsStep>>,
    bait_objectives: Option<Vec<f64>>,
    scores: Option<Scores>,
}

#[allow(clippy::too_many_arguments)]
fn select_batch(
    config: &ExperimentConfig,
    scenario: &Scenario,
    ensemble: &PosteriorEnsemble,
    labeled: &LabeledSet,
    remaining: &[usize],
    iter_seed: u64,
) -> Result<SelectionOutcome> {
    let b = config.b;
    let prior = Prior::new(config.sigma2)?;
    let val_take = config.val_subsample_or_default(scenario.validation.n_rows());

    let base_scores = |kind: ScoreKind| -> Result<Scores> {
        let cand = scenario.pool.gather(remaining);
        let pred = predict_with_ids(ensemble, &cand, remaining);
        Ok(match kind {
            ScoreKind::Bald => bald_scores(&pred.tensor),
            ScoreKind::Confidence => confidence_scores(
                (0..remaining.len()).map(|i| pred.bma.row(i).to_vec()),
                remaining.to_vec(),
            ),
            ScoreKind::Epig => {
                let keep =
                    validation_subsample(scenario.validation.n_rows(), val_take, iter_seed);
                let val = scenario.validation.gather(&keep);
                let val_pred = predict_with_ids(ensemble, &val, &keep);
                let values = epig_scores_from_tensors(&pred.tensor, &val_pred.tensor);
                Scores::new(values, ScoreKind::Epig, remaining.to_vec())
            }
            ScoreKind::BaitMarginal => unreachable!("bait has its own path"),
        })
    };

    let from_positions = |positions: Vec<usize>| -> Vec<usize> {
        positions.into_iter().map(|p| remaining[p]).collect()
    };

    let outcome = match config.algorithm {
        Algorithm::Random => {
            let mut rng = rng::stream(iter_seed, &[TAG_RANDOM_BASELINE]);
            let positions = rng::sample_without_replacement(&mut rng, remaining.len(), b);
            SelectionOutcome {
                ids: from_positions(positions),
                parbals_steps: None,
                bait_objectives: None,
                scores: None,
            }
        }
        Algorithm::Confidence | Algorithm::Bald | Algorithm::Epig => {
            let kind = match config.algorithm {
                Algorithm::Confidence => ScoreKind::Confidence,
                Algorithm::Bald => ScoreKind::Bald,
                _ => ScoreKind::Epig,
            };
            let scores = base_scores(kind)?;
            let positions = select_top_b(&scores, b)?;
            SelectionOutcome {
                ids: from_positions(positions),
                parbals_steps: None,
                bait_objectives: None,
                scores: Some(scores),
            }
        }
        Algorithm::PowerBald
        | Algorithm::PowerEpig
        | Algorithm::SoftmaxBald
        | Algorithm::SoftmaxEpig
        | Algorithm::SoftRankBald
        | Algorithm::SoftRankEpig => {
            let kind = match config.algorithm {
                Algorithm::PowerBald | Algorithm::SoftmaxBald | Algorithm::SoftRankBald => {
                    ScoreKind::Bald
                }
                _ => ScoreKind::Epig,
            };
            let variant = config.algorithm.stochastic_variant().expect("stochastic");
            let beta = config.beta.unwrap_or(1.0);
            let scores = base_scores(kind)?;
            let positions = select_stochastic(&scores, b, variant, beta, iter_seed)?;
            SelectionOutcome {
                ids: from_positions(positions),
                parbals_steps: None,
                bait_objectives: None,
                scores: Some(scores),
            }
        }
        Algorithm::BatchBald => {
            let cand = scenario.pool.gather(remaining);
            let pred = predict_with_ids(ensemble, &cand, remaining);
            let positions = crate::acquisition::batchbald_greedy(&pred.tensor, b)?;
            SelectionOutcome {
                ids: from_positions(positions),
                parbals_steps: None,
                bait_objectives: None,
                scores: None,
            }
        }
        Algorithm::Bait => {
            let selection = bait_greedy(
                &ensemble.map,
                labeled,
                &scenario.pool,
                remaining,
                b,
                &prior,
                None,
                iter_seed,
            )?;
            SelectionOutcome {
                ids: selection.batch,
                parbals_steps: None,
                bait_objectives: Some(selection.objectives),
                scores: None,
            }
        }
        Algorithm::ParbalsEpig | Algorithm::ParbalsMapEpig => {
            let parbals_config = ParbalsConfig {
                m: if config.algorithm == Algorithm::ParbalsMapEpig {
                    1
                } else {
                    config.m.expect("validated")
                },
                budget: b,
                variant: if config.algorithm == Algorithm::ParbalsMapEpig {
                    ParbalsVariant::Map
                } else {
                    ParbalsVariant::Sampled
                },
                coupling: config.universe_coupling,
                val_subsample: val_take,
                seed: iter_seed,
            };
            let settings = FitSettings {
                prior,
                k: config.k,
                tol: DEFAULT_TOL,
            };
            let (ids, steps) = parbals_select(
                ensemble,
                &scenario.pool,
                remaining,
                &scenario.validation,
                labeled,
                &parbals_config,
                &settings,
            )?;
            SelectionOutcome {
                ids,
                parbals_steps: Some(steps),
                bait_objectives: None,
                scores: None,
            }
        }
    };
    Ok(outcome)
}

/// Run one experiment end to end: seeded initial labeled set, fit, then T
/// rounds of select / acquire / refit / evaluate. Fully deterministic per
/// config and seed. Optionally dumps per-iteration scores as CSV rows.
pub fn run_experiment(config: &ExperimentConfig) -> Result<LearningCurve> {
    run_experiment_with_scores(config, None)
}

pub fn run_experiment_with_scores(
    config: &ExperimentConfig,
    score_sink: Option<&mut dyn std::io::Write>,
) -> Result<LearningCurve> {
    config.validate()?;
    let scenario = match &config.scenario {
        ScenarioSource::Manifest(path) => import_scenario(path)?,
        ScenarioSource::Synthetic(spec) => generate_synthetic(spec, config.seed)?,
    };
    run_on_scenario(config, &scenario, score_sink)
}

/// [`run_experiment`] against an already constructed scenario.
pub fn run_on_scenario(
    config: &ExperimentConfig,
    scenario: &Scenario,
    mut score_sink: Option<&mut dyn std::io::Write>,
) -> Result<LearningCurve> {
    config.validate()?;
    let prior = Prior::new(config.sigma2)?;
    let n_pool = scenario.pool.n_rows();

    let initial: Vec<usize> = if scenario.initial_labeled.is_empty() {
        let mut rng = rng::stream(config.seed, &[TAG_INIT_LABELED]);
        rng::sample_without_replacement(&mut rng, n_pool, config.initial_labeled)
    } else {
        if scenario.initial_labeled.len() != config.initial_labeled {
            return Err(Error::InvalidConfig(format!(
                "scenario pins {} initial labeled points but the config asks for {}",
                scenario.initial_labeled.len(),
                config.initial_labeled
            )));
        }
        scenario.initial_labeled.clone()
    };
    if initial.len() > n_pool {
        return Err(Error::PoolExhausted {
            needed: initial.len(),
            available: n_pool,
        });
    }
    let needed = config.t * config.b;
    let available = n_pool - initial.len();
    if needed > available {
        return Err(Error::PoolExhausted { needed, available });
    }

    let mut labeled = LabeledSet::new(scenario.num_classes, scenario.pool.n_cols());
    for &i in &initial {
        labeled.push(scenario.pool.row(i), scenario.oracle().reveal(i));
    }
    let mut remaining: Vec<usize> = (0..n_pool).filter(|i| !initial.contains(i)).collect();

    let mut records = Vec::with_capacity(config.t + 1);
    let start = Instant::now();
    let mut ensemble = laplace_posterior(&labeled, &prior, config.k, config.seed, DEFAULT_TOL)?;
    let (acc, nll) = evaluate(&ensemble, &scenario.test, scenario.test_labels())?;
    records.push(IterationRecord {
        kind: "iteration".into(),
        iteration: 0,
        labeled_count: labeled.len(),
        test_accuracy: acc,
        test_mean_nll: nll,
        selected_ids: initial.clone(),
        parbals_steps: None,
        bait_objectives: None,
        wall_time_s: start.elapsed().as_secs_f64(),
    });

    for t in 1..=config.t {
        let iter_start = Instant::now();
        let iter_seed = rng::stream_id(config.seed, &[TAG_ITERATION, t as u64]);
        let outcome = select_batch(config, scenario, &ensemble, &labeled, &remaining, iter_seed)
            .map_err(|e| annotate_iteration(e, t))?;
        debug_assert_eq!(outcome.ids.len(), config.b);

        if let (Some(sink), Some(scores)) = (score_sink.as_deref_mut(), outcome.scores.as_ref()) {
            crate::acquisition::dump_scores_csv(sink, scores, t)?;
        }

        remaining.retain(|i| !outcome.ids.contains(i));
        for &i in &outcome.ids {
            labeled.push(scenario.pool.row(i), scenario.oracle().reveal(i));
        }
        ensemble = laplace_posterior(&labeled, &prior, config.k, iter_seed, DEFAULT_TOL)
            .map_err(|e| annotate_iteration(e, t))?;
        let (acc, nll) = evaluate(&ensemble, &scenario.test, scenario.test_labels())?;
        records.push(IterationRecord {
            kind: "iteration".into(),
            iteration: t,
            labeled_count: labeled.len(),
            test_accuracy: acc,
            test_mean_nll: nll,
            selected_ids: outcome.ids,
            parbals_steps: outcome.parbals_steps,
            bait_objectives: outcome.bait_objectives,
            wall_time_s: iter_start.elapsed().as_secs_f64(),
        });
    }

    let last = records.last().expect("at least the initial record");
    let summary = RunSummary {
        kind: "summary".into(),
        algorithm: config.algorithm.name().into(),
        t: config.t,
        b: config.b,
        k: config.k,
        seed: config.seed,
        final_accuracy: last.test_accuracy,
        final_mean_nll: last.test_mean_nll,
        final_labeled_count: last.labeled_count,
    };
    Ok(LearningCurve { records, summary })
}

fn annotate_iteration(e: Error, iteration: usize) -> Error {
    Error::InvalidConfig(format!("iteration {iteration}: {e}"))
}

/// Parse a JSONL result file back into its iteration records and trailing
/// summary line.
pub fn parse_jsonl(text: &str) -> Result<(Vec<IterationRecord>, Option<RunSummary>)> {
    let mut records = Vec::new();
    let mut summary = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)?;
        match value.get("kind").and_then(|k| k.as_str()) {
            Some("iteration") => records.push(serde_json::from_value(value)?),
            Some("summary") => summary = Some(serde_json::from_value(value)?),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unexpected JSONL record kind {other:?}"
                )))
            }
        }
    }
    Ok((records, summary))
}
