//! Tabular data loading, preprocessing, and scenario construction.

pub mod preprocess;
pub mod scenario;
pub mod synthetic;
pub mod table;

pub use preprocess::{preprocess, FeatureMatrix, QuantileEdges};
pub use scenario::{
    export_scenario, import_scenario, make_one_vs_all, make_subpop_shift, split, LabelOracle,
    Scenario, SplitIndices,
};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use table::{load_csv, Column, RawTable};
