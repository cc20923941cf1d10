//! Quantile binning and one-hot encoding.

use std::collections::BTreeMap;

use crate::dataset::table::{Column, RawTable};
use crate::error::{Error, Result};

/// A dense n x d feature matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    pub feature_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize, feature_names: Vec<String>) -> Self {
        assert_eq!(data.len(), n_rows * n_cols, "data length mismatch");
        assert_eq!(feature_names.len(), n_cols, "feature name count mismatch");
        assert!(data.iter().all(|v| v.is_finite()), "non-finite feature");
        Self {
            data,
            n_rows,
            n_cols,
            feature_names,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], feature_names: Vec<String>) -> Self {
        let n_rows = rows.len();
        let n_cols = feature_names.len();
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols);
            data.extend_from_slice(r);
        }
        Self::new(data, n_rows, n_cols, feature_names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols)
    }

    /// New matrix containing the given rows, in the given order.
    pub fn gather(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix::new(data, indices.len(), self.n_cols, self.feature_names.clone())
    }
}

/// Bin edges for one numeric feature. A value `v` falls in bin
/// `#{edges e : e < v}`; ties at an edge go to the lower bin.
#[derive(Debug, Clone)]
pub struct QuantileEdges {
    edges: Vec<f64>,
}

impl QuantileEdges {
    /// Edges at the j/bins empirical quantiles, j = 1..bins-1, where the
    /// q-quantile of n sorted values is the ceil(q*n)-th smallest.
    pub fn fit(values: &[f64], bins: usize) -> Self {
        assert!(bins >= 2, "bins must be at least 2");
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite features"));
        let n = sorted.len();
        let mut edges = Vec::with_capacity(bins - 1);
        for j in 1..bins {
            let rank = (j * n).div_ceil(bins); // ceil(j*n/bins)
            edges.push(sorted[rank.saturating_sub(1)]);
        }
        Self { edges }
    }

    pub fn bin(&self, v: f64) -> usize {
        self.edges.iter().take_while(|&&e| e < v).count()
    }
}

/// Replace numeric features by quantile-bin indices, then one-hot encode
/// every feature. Bin edges are fit on all rows of the table, labels are
/// never consulted. Output entries are {0,1} and each original feature's
/// block sums to 1 per row.
pub fn preprocess(table: &RawTable, bins: usize) -> Result<FeatureMatrix> {
    if bins < 2 {
        return Err(Error::InvalidConfig(format!(
            "quantile binning needs bins >= 2, got {bins}"
        )));
    }
    let n = table.n_rows();
    let mut blocks: Vec<(Vec<String>, Vec<usize>)> = Vec::new(); // (level names, per-row level index)

    for (name, col) in table.feature_names.iter().zip(&table.columns) {
        match col {
            Column::Numeric(values) => {
                let edges = QuantileEdges::fit(values, bins);
                let binned: Vec<usize> = values.iter().map(|&v| edges.bin(v)).collect();
                let mut levels: Vec<usize> = binned.clone();
                levels.sort_unstable();
                levels.dedup();
                if levels.len() == 1 {
                    log::warn!("feature '{name}' is constant after binning; emitting a single-level one-hot");
                }
                let level_names = levels.iter().map(|b| format!("{name}=bin{b}")).collect();
                let index_of: BTreeMap<usize, usize> =
                    levels.iter().enumerate().map(|(i, &b)| (b, i)).collect();
                let rows = binned.iter().map(|b| index_of[b]).collect();
                blocks.push((level_names, rows));
            }
            Column::Categorical(values) => {
                let mut levels: Vec<&str> = values.iter().map(String::as_str).collect();
                levels.sort_unstable();
                levels.dedup();
                let level_names = levels.iter().map(|l| format!("{name}={l}")).collect();
                let index_of: BTreeMap<&str, usize> =
                    levels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
                let rows = values.iter().map(|v| index_of[v.as_str()]).collect();
                blocks.push((level_names, rows));
            }
        }
    }

    let width: usize = blocks.iter().map(|(names, _)| names.len()).sum();
    let mut feature_names = Vec::with_capacity(width);
    for (names, _) in &blocks {
        feature_names.extend(names.iter().cloned());
    }

    let mut data = vec![0.0; n * width];
    let mut offset = 0;
    for (names, rows) in &blocks {
        for (r, &level) in rows.iter().enumerate() {
            data[r * width + offset + level] = 1.0;
        }
        offset += names.len();
    }

    Ok(FeatureMatrix::new(data, n, width, feature_names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::table::Column;

    fn numeric_table(values: Vec<f64>) -> RawTable {
        let n = values.len();
        RawTable {
            feature_names: vec!["x".into()],
            columns: vec![Column::Numeric(values)],
            labels: vec![0; n],
            label_column: "label".into(),
        }
    }

    /// Independent sort-and-cut oracle for the bin of one value.
    fn oracle_bin(values: &[f64], bins: usize, v: f64) -> usize {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let mut bin = 0;
        for j in 1..bins {
            let rank = (j * n + bins - 1) / bins; // ceil
            if sorted[rank - 1] < v {
                bin += 1;
            }
        }
        bin
    }

    #[test]
    fn bins_match_sort_and_cut_oracle_on_1_to_100() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let edges = QuantileEdges::fit(&values, 10);
        assert_eq!(edges.bin(5.0), 0);
        assert_eq!(edges.bin(95.0), 9);
        assert_eq!(oracle_bin(&values, 10, 5.0), 0);
        assert_eq!(oracle_bin(&values, 10, 95.0), 9);
        for v in [1.0, 10.0, 10.5, 37.0, 50.0, 90.0, 100.0] {
            assert_eq!(edges.bin(v), oracle_bin(&values, 10, v), "value {v}");
        }
    }

    #[test]
    fn edge_ties_go_to_the_lower_bin() {
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let edges = QuantileEdges::fit(&values, 10);
        // the first edge is exactly 10; 10 itself stays in bin 0
        assert_eq!(edges.bin(10.0), 0);
        assert_eq!(edges.bin(10.0 + 1e-9), 1);
    }

    #[test]
    fn categorical_one_hot_rows_sum_to_one() {
        let t = RawTable {
            feature_names: vec!["c".into()],
            columns: vec![Column::Categorical(
                ["a", "b", "c", "a"].iter().map(|s| s.to_string()).collect(),
            )],
            labels: vec![0; 4],
            label_column: "label".into(),
        };
        let m = preprocess(&t, 10).unwrap();
        assert_eq!(m.n_cols(), 3);
        for row in m.rows() {
            assert_eq!(row.iter().sum::<f64>(), 1.0);
            assert!(row.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }

    #[test]
    fn preprocessing_is_deterministic() {
        let t = numeric_table((1..=50).map(f64::from).collect());
        assert_eq!(preprocess(&t, 10).unwrap(), preprocess(&t, 10).unwrap());
    }

    #[test]
    fn constant_column_yields_single_level() {
        let t = numeric_table(vec![3.0; 7]);
        let m = preprocess(&t, 10).unwrap();
        assert_eq!(m.n_cols(), 1);
        assert!(m.rows().all(|r| r == [1.0]));
    }

    #[test]
    fn binning_is_monotone() {
        let values: Vec<f64> = vec![0.3, 1.2, 5.0, 2.2, 9.1, 4.4, 4.4, 7.7, 0.1, 6.0];
        let edges = QuantileEdges::fit(&values, 4);
        let mut pairs: Vec<f64> = values.clone();
        pairs.extend([0.0, 10.0, 4.8]);
        pairs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in pairs.windows(2) {
            assert!(edges.bin(w[0]) <= edges.bin(w[1]));
        }
    }
}
