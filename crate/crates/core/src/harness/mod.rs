//! The experiment loop: declarative configs, the active-learning iteration
//! driver, multi-seed suites, and SVG learning-curve plots.

mod config;
mod plot;
mod runner;
mod suite;

pub use config::{Algorithm, ExperimentConfig, ScenarioSource, DEFAULT_VAL_SUBSAMPLE};
pub use plot::{plot_svg, CurveGroup};
pub use runner::{
    evaluate, parse_jsonl, run_experiment, run_experiment_with_scores, run_on_scenario,
    IterationRecord, LearningCurve, RunSummary,
};
pub use suite::{run_suite, summarize, SuiteRow, SuiteSummary};
