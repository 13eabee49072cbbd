//! CSV ingestion and emission. Files are UTF-8, comma-separated, numeric,
//! rectangular, with an optional header row; labels (when requested) must
//! be integers ≥ 1. Parse errors carry 1-based line numbers.

use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model_io::atomic_write;
use crate::pipeline::LabeledDataset;

/// Result of [`parse_dataset`]: the label column, when present, has been
/// split off and validated.
#[derive(Debug, Clone)]
pub enum ParsedDataset {
    /// Feature matrix only.
    Unlabeled(DMatrix<f64>),
    Labeled(LabeledDataset),
}

impl ParsedDataset {
    /// (rows, feature columns)
    pub fn shape(&self) -> (usize, usize) {
        match self {
            ParsedDataset::Unlabeled(x) => x.shape(),
            ParsedDataset::Labeled(d) => d.x.shape(),
        }
    }
}

/// Read a numeric CSV file into a row-major matrix.
pub fn parse_csv_matrix(path: &Path, has_header: bool) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    parse_csv_text(&text, has_header)
}

fn parse_csv_text(text: &str, has_header: bool) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if has_header && idx == 0 {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            let cell = cell.trim();
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("cell '{cell}' is not numeric"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("cell '{cell}' is not finite"),
                });
            }
            row.push(value);
        }
        if rows.is_empty() {
            width = row.len();
        } else if row.len() != width {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("row has {} cells, expected {width}", row.len()),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: if has_header { 2 } else { 1 },
            msg: "file contains no data rows".into(),
        });
    }
    let m = rows.len();
    Ok(DMatrix::from_fn(m, width, |i, j| rows[i][j]))
}

/// Load a dataset; `label_column` is 1-based. With a label column the
/// number of classes is inferred as the largest label seen.
pub fn parse_dataset(
    path: &Path,
    has_header: bool,
    label_column: Option<usize>,
) -> Result<ParsedDataset> {
    let full = parse_csv_matrix(path, has_header)?;
    let Some(col) = label_column else {
        return Ok(ParsedDataset::Unlabeled(full));
    };
    let (m, total) = full.shape();
    if col == 0 || col > total {
        return Err(Error::invalid(format!(
            "label column {col} outside 1..={total}"
        )));
    }
    if total < 2 {
        return Err(Error::invalid("labeled file needs at least one feature column"));
    }
    let header_offset = usize::from(has_header);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let v = full[(i, col - 1)];
        if v.fract() != 0.0 || v < 1.0 {
            return Err(Error::Parse {
                line: i + 1 + header_offset,
                msg: format!("label {v} out of range: labels are integers >= 1"),
            });
        }
        labels.push(v as usize);
    }
    let num_classes = labels.iter().copied().max().unwrap_or(0);
    let feature_cols: Vec<usize> = (0..total).filter(|&j| j != col - 1).collect();
    let x = full.select_columns(feature_cols.iter());
    Ok(ParsedDataset::Labeled(LabeledDataset::new(
        x,
        labels,
        num_classes,
    )?))
}

/// Write a matrix as CSV with round-trip-exact floats (atomic).
pub fn write_matrix_csv(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", matrix[(i, j)]));
        }
        out.push('\n');
    }
    atomic_write(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn unlabeled_read() {
        let f = write_tmp("1,0\n0,1\n1,1\n");
        let parsed = parse_dataset(f.path(), false, None).unwrap();
        assert_eq!(parsed.shape(), (3, 2));
        match parsed {
            ParsedDataset::Unlabeled(x) => {
                assert_eq!(x[(0, 0)], 1.0);
                assert_eq!(x[(2, 1)], 1.0);
            }
            _ => panic!("expected unlabeled"),
        }
    }

    #[test]
    fn label_zero_is_rejected() {
        let f = write_tmp("1,0\n0,1\n1,1\n");
        let err = parse_dataset(f.path(), false, Some(1)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("label 0"), "got: {msg}");
        assert!(msg.contains("line 2"), "got: {msg}");
    }

    #[test]
    fn labeled_read_splits_the_label_column() {
        let f = write_tmp("x,y,label\n0.5,1.5,1\n0.25,-2,2\n");
        let parsed = parse_dataset(f.path(), true, Some(3)).unwrap();
        match parsed {
            ParsedDataset::Labeled(d) => {
                assert_eq!(d.x.shape(), (2, 2));
                assert_eq!(d.y, vec![1, 2]);
                assert_eq!(d.num_classes, 2);
                assert_eq!(d.x[(1, 1)], -2.0);
            }
            _ => panic!("expected labeled"),
        }
    }

    #[test]
    fn ragged_row_is_named() {
        let f = write_tmp("1,2,3\n4,5\n");
        let err = parse_csv_matrix(f.path(), false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "got: {msg}");
        assert!(msg.contains("2 cells"), "got: {msg}");
    }

    #[test]
    fn non_numeric_cell_is_named() {
        let f = write_tmp("1,2\n3,abc\n");
        let err = parse_csv_matrix(f.path(), false).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("abc") && msg.contains("line 2"), "got: {msg}");
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        let f = write_tmp("");
        assert!(matches!(
            parse_csv_matrix(f.path(), false).unwrap_err(),
            Error::Parse { .. }
        ));
        let f = write_tmp("only,a,header\n");
        assert!(parse_csv_matrix(f.path(), true).is_err());
    }

    #[test]
    fn header_skip_keeps_line_numbers_honest() {
        let f = write_tmp("a,b\n1,2\nx,4\n");
        let err = parse_csv_matrix(f.path(), true).unwrap_err();
        assert!(err.to_string().contains("line 3"));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let values = [
            0.1,
            -1.0 / 3.0,
            1e-17,
            123456789.123456,
            -0.0,
            2.0f64.powi(-40),
        ];
        let m = DMatrix::from_fn(2, 3, |i, j| values[i * 3 + j]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_matrix_csv(&path, &m).unwrap();
        let back = parse_csv_matrix(&path, false).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert!(a.to_bits() == b.to_bits(), "{a} != {b}");
        }
    }
}
