//! Pool / validation / test scenarios and their JSON manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::preprocess::FeatureMatrix;
use crate::error::{Error, Result};
use crate::rng::{self, TAG_SPLIT};

/// Holds the pool's hidden labels. Acquisition code never sees this type;
/// only the experiment loop calls `reveal` after a point is selected.
#[derive(Debug, Clone)]
pub struct LabelOracle {
    labels: Vec<usize>,
}

impl LabelOracle {
    pub fn new(labels: Vec<usize>) -> Self {
        Self { labels }
    }

    pub fn reveal(&self, pool_index: usize) -> usize {
        self.labels[pool_index]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Row indices of each part when a scenario was carved out of one table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct SplitIndices {
    pub pool: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn assert_disjoint(&self) -> Result<()> {
        let mut all: Vec<usize> = self
            .pool
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .copied()
            .collect();
        let total = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != total {
            return Err(Error::InvalidConfig(
                "pool/validation/test index sets overlap".into(),
            ));
        }
        Ok(())
    }
}

/// An evaluation scenario: unlabeled pool with a hidden label oracle, an
/// unlabeled validation set from the test distribution, and a labeled test
/// set reserved for the harness. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub num_classes: usize,
    pub pool: FeatureMatrix,
    pub validation: FeatureMatrix,
    pub test: FeatureMatrix,
    oracle: LabelOracle,
    test_labels: Vec<usize>,
    pub initial_labeled: Vec<usize>,
    pub provenance: Option<SplitIndices>,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        num_classes: usize,
        pool: FeatureMatrix,
        pool_labels: Vec<usize>,
        validation: FeatureMatrix,
        test: FeatureMatrix,
        test_labels: Vec<usize>,
        initial_labeled: Vec<usize>,
        provenance: Option<SplitIndices>,
    ) -> Result<Self> {
        if pool.n_rows() != pool_labels.len() || test.n_rows() != test_labels.len() {
            return Err(Error::InvalidConfig("label/feature count mismatch".into()));
        }
        if num_classes < 2 {
            return Err(Error::InvalidConfig("need at least 2 classes".into()));
        }
        if let Some(bad) = pool_labels.iter().chain(&test_labels).find(|&&y| y >= num_classes) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range 0..{num_classes}"
            )));
        }
        if let Some(bad) = initial_labeled.iter().find(|&&i| i >= pool.n_rows()) {
            return Err(Error::InvalidConfig(format!(
                "initial labeled index {bad} out of pool range"
            )));
        }
        if let Some(p) = &provenance {
            p.assert_disjoint()?;
        }
        Ok(Self {
            num_classes,
            pool,
            validation,
            test,
            oracle: LabelOracle::new(pool_labels),
            test_labels,
            initial_labeled,
            provenance,
        })
    }

    pub fn oracle(&self) -> &LabelOracle {
        &self.oracle
    }

    /// Test labels, for harness-side evaluation only.
    pub fn test_labels(&self) -> &[usize] {
        &self.test_labels
    }
}

/// Collapse labels to target-vs-rest: 0 where the original label equals
/// `positive_class`, 1 elsewhere.
pub fn make_one_vs_all(labels: &[usize], positive_class: usize) -> Vec<usize> {
    labels
        .iter()
        .map(|&y| usize::from(y != positive_class))
        .collect()
}

/// Relabel to {class0 -> 0, class1 -> 1, rest -> 2} and mask the rows that
/// belong to the two kept classes. Test sets built from the mask contain
/// only classes 0 and 1; the pool keeps all three.
pub fn make_subpop_shift(labels: &[usize]) -> Result<(Vec<usize>, Vec<bool>)> {
    let mut distinct: Vec<usize> = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "subpopulation shift needs at least 3 distinct classes, found {}",
            distinct.len()
        )));
    }
    let relabeled: Vec<usize> = labels
        .iter()
        .map(|&y| match y {
            0 => 0,
            1 => 1,
            _ => 2,
        })
        .collect();
    let mask = relabeled.iter().map(|&y| y < 2).collect();
    Ok((relabeled, mask))
}

/// Disjoint pool/validation/test index lists over `0..n`, sized by floor
/// allocation of the fractions, deterministic per seed.
pub fn split(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<SplitIndices> {
    let (fp, fv, ft) = fractions;
    if fp <= 0.0 || fv <= 0.0 || ft <= 0.0 || fp + fv + ft > 1.0 + 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "fractions must be positive and sum to at most 1, got {fractions:?}"
        )));
    }
    let n_pool = (n as f64 * fp).floor() as usize;
    let n_val = (n as f64 * fv).floor() as usize;
    let n_test = (n as f64 * ft).floor() as usize;
    if n_pool == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::SplitTooSmall { n, fractions });
    }
    let mut rng = rng::stream(seed, &[TAG_SPLIT, n as u64]);
    let perm = rng::permutation(&mut rng, n);
    Ok(SplitIndices {
        pool: perm[..n_pool].to_vec(),
        validation: perm[n_pool..n_pool + n_val].to_vec(),
        test: perm[n_pool + n_val..n_pool + n_val + n_test].to_vec(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    num_classes: usize,
    pool_features: String,
    pool_labels: String,
    validation_features: String,
    test_features: String,
    test_labels: String,
    initial_labeled: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_indices: Option<SplitIndices>,
}

/// Write a scenario as a JSON manifest plus feature/label CSV files next to
/// it, for reproducible reruns. Validation labels are never written.
pub fn export_scenario(scenario: &Scenario, manifest_path: &Path) -> Result<()> {
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let stem = manifest_path
        .file_stem()
        .map_or_else(|| "scenario".to_owned(), |s| s.to_string_lossy().into_owned());

    let file = |suffix: &str| format!("{stem}.{suffix}.csv");
    write_features(&dir.join(file("pool")), &scenario.pool)?;
    write_labels(&dir.join(file("pool_labels")), &scenario.oracle.labels)?;
    write_features(&dir.join(file("validation")), &scenario.validation)?;
    write_features(&dir.join(file("test")), &scenario.test)?;
    write_labels(&dir.join(file("test_labels")), &scenario.test_labels)?;

    let manifest = Manifest {
        num_classes: scenario.num_classes,
        pool_features: file("pool"),
        pool_labels: file("pool_labels"),
        validation_features: file("validation"),
        test_features: file("test"),
        test_labels: file("test_labels"),
        initial_labeled: scenario.initial_labeled.clone(),
        source_indices: scenario.provenance.clone(),
    };
    fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Load a scenario previously written by [`export_scenario`].
pub fn import_scenario(manifest_path: &Path) -> Result<Scenario> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let pool = read_features(&dir.join(&manifest.pool_features))?;
    let pool_labels = read_labels(&dir.join(&manifest.pool_labels))?;
    let validation = read_features(&dir.join(&manifest.validation_features))?;
    let test = read_features(&dir.join(&manifest.test_features))?;
    let test_labels = read_labels(&dir.join(&manifest.test_labels))?;
    Scenario::new(
        manifest.num_classes,
        pool,
        pool_labels,
        validation,
        test,
        test_labels,
        manifest.initial_labeled,
        manifest.source_indices,
    )
}

fn write_features(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&m.feature_names)?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(())
}

fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let names: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let mut data = Vec::new();
    let mut n_rows = 0;
    for record in r.records() {
        let record = record?;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::BadCell {
                row: n_rows + 2,
                column: names.get(c).cloned().unwrap_or_default(),
                value: field.to_owned(),
                reason: "expected a decimal number".into(),
            })?;
            data.push(v);
        }
        n_rows += 1;
    }
    Ok(FeatureMatrix::new(data, n_rows, names.len(), names))
}

fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label"])?;
    for &y in labels {
        w.write_record([y.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut labels = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        let y: usize = record[0].parse().map_err(|_| Error::BadCell {
            row: i + 2,
            column: "label".into(),
            value: record[0].to_owned(),
            reason: "expected a non-negative integer".into(),
        })?;
        labels.push(y);
    }
    Ok(labels)
}
