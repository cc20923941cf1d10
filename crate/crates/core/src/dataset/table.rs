//! CSV loading and column typing.

use std::collections::BTreeSet;
use std::path::Path;

use crate::error::{Error, Result};

/// A column is numeric iff every non-empty cell parses as a finite decimal
/// number; otherwise it is categorical.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Numeric(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of distinct levels (categorical) or distinct values (numeric).
    pub fn distinct_levels(&self) -> usize {
        match self {
            Column::Numeric(v) => {
                let set: BTreeSet<u64> = v.iter().map(|x| x.to_bits()).collect();
                set.len()
            }
            Column::Categorical(v) => {
                let set: BTreeSet<&str> = v.iter().map(|s| s.as_str()).collect();
                set.len()
            }
        }
    }
}

/// A parsed table: feature columns plus an integer label column.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub feature_names: Vec<String>,
    pub columns: Vec<Column>,
    pub labels: Vec<usize>,
    pub label_column: String,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }
}

/// Load an RFC-4180 CSV with a header row; `label_column` must hold
/// non-negative integer class labels.
pub fn load_csv(path: &Path, label_column: &str) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_owned()))?;

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); headers.len()];
    let mut n_rows = 0usize;
    for (row_no, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::BadCell {
                row: row_no + 2, // 1-based, after the header line
                column: String::new(),
                value: String::new(),
                reason: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (c, field) in record.iter().enumerate() {
            cells[c].push(field.to_owned());
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::EmptyTable);
    }

    let mut labels = Vec::with_capacity(n_rows);
    for (r, cell) in cells[label_idx].iter().enumerate() {
        let y: usize = cell.trim().parse().map_err(|_| Error::BadCell {
            row: r + 2,
            column: label_column.to_owned(),
            value: cell.clone(),
            reason: "label must be a non-negative integer".into(),
        })?;
        labels.push(y);
    }

    let mut feature_names = Vec::new();
    let mut columns = Vec::new();
    for (c, name) in headers.iter().enumerate() {
        if c == label_idx {
            continue;
        }
        feature_names.push(name.clone());
        columns.push(type_column(name, &cells[c])?);
    }

    Ok(RawTable {
        feature_names,
        columns,
        labels,
        label_column: label_column.to_owned(),
    })
}

fn type_column(name: &str, cells: &[String]) -> Result<Column> {
    let numeric = cells.iter().all(|c| {
        let t = c.trim();
        t.is_empty() || t.parse::<f64>().is_ok_and(|v| v.is_finite())
    });
    if numeric {
        let mut values = Vec::with_capacity(cells.len());
        for (r, cell) in cells.iter().enumerate() {
            let t = cell.trim();
            if t.is_empty() {
                return Err(Error::BadCell {
                    row: r + 2,
                    column: name.to_owned(),
                    value: cell.clone(),
                    reason: "empty cell in numeric column".into(),
                });
            }
            values.push(t.parse::<f64>().expect("checked above"));
        }
        Ok(Column::Numeric(values))
    } else {
        Ok(Column::Categorical(cells.to_vec()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_three_rows_two_features() {
        let f = write_csv("a,b,label\n1,2,0\n3,4,1\n5,6,0\n");
        let t = load_csv(f.path(), "label").unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.n_features(), 2);
        assert_eq!(t.labels, vec![0, 1, 0]);
    }

    #[test]
    fn missing_label_column_names_it() {
        let f = write_csv("a,b\n1,2\n");
        let err = load_csv(f.path(), "label").unwrap_err();
        assert!(matches!(err, Error::MissingLabelColumn(ref c) if c == "label"));
        assert!(err.to_string().contains("label"));
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write_csv("a,label\n");
        assert!(matches!(load_csv(f.path(), "label"), Err(Error::EmptyTable)));
    }

    #[test]
    fn mixed_column_is_categorical_with_distinct_levels() {
        // distinct-value count oracle: {"x","y","x"} has 2 distinct values
        let f = write_csv("a,label\nx,0\ny,1\nx,0\n");
        let t = load_csv(f.path(), "label").unwrap();
        assert!(matches!(t.columns[0], Column::Categorical(_)));
        assert_eq!(t.columns[0].distinct_levels(), 2);
    }

    #[test]
    fn nan_and_inf_cells_make_a_column_categorical_not_numeric() {
        let f = write_csv("a,label\nNaN,0\n1.5,1\n");
        let t = load_csv(f.path(), "label").unwrap();
        assert!(matches!(t.columns[0], Column::Categorical(_)));
    }

    #[test]
    fn bad_label_reports_row_number() {
        let f = write_csv("a,label\n1,0\n2,oops\n");
        let err = load_csv(f.path(), "label").unwrap_err();
        match err {
            Error::BadCell { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
