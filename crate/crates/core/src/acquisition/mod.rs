//! Acquisition scores and batch selection rules.

mod mi;
mod scores;
mod select;

pub use mi::{
    batchbald_greedy, batchbald_joint_mi, epig_score, epig_scores_from_tensors, pairwise_mi,
    pairwise_mi_cross, validation_subsample, JointPredictive, JOINT_CAP,
};
pub use scores::{
    bald_score, bald_scores, confidence_score, confidence_scores, dump_scores_csv, entropy,
    ScoreKind, Scores,
};
pub use select::{
    select_stochastic, select_stochastic_with_noise, select_top_b, StochasticVariant,
};

pub(crate) use mi::argmax_lowest_index;
