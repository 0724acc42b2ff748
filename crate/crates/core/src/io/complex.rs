//! Complex scalars and matrices as they appear in model files.
//!
//! An entry is a plain number, a `[re, im]` pair, or a string such as
//! `"0.3-0.1i"`. A matrix is a list of rows. A row of `2c` plain numbers,
//! where `c` is the expected column count, is read as interleaved
//! `re, im` pairs, so `[[1, 0]]` is the `1 × 1` matrix `1 + 0i`.

use serde::{Deserialize, Serialize};

use super::expr::{parse_complex, ExprError};
use crate::{CMatrix, Complex64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
    Text(String),
}

impl ComplexEntry {
    pub fn value(&self) -> Result<Complex64, ExprError> {
        match self {
            ComplexEntry::Real(x) => Ok(Complex64::new(*x, 0.0)),
            ComplexEntry::Pair([re, im]) => Ok(Complex64::new(*re, *im)),
            ComplexEntry::Text(s) => parse_complex(s),
        }
    }

    /// Canonical form: real numbers stay plain, everything else is a pair.
    pub fn from_value(z: Complex64) -> Self {
        if z.im == 0.0 {
            ComplexEntry::Real(z.re)
        } else {
            ComplexEntry::Pair([z.re, z.im])
        }
    }
}

pub type MatrixLiteral = Vec<Vec<ComplexEntry>>;

/// Reasons a matrix literal cannot be read.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("row {row}, column {col}: {source}")]
    Entry { row: usize, col: usize, source: ExprError },
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("expected {expected} rows, found {found}")]
    Rows { found: usize, expected: usize },
    #[error("matrix is empty")]
    Empty,
    #[error("row {row}, column {col}: entry is not finite")]
    NonFinite { row: usize, col: usize },
}

/// Read a literal. `cols` fixes the expected column count when known.
pub fn matrix_from_literal(rows: &MatrixLiteral, expected_rows: Option<usize>, cols: Option<usize>) -> Result<CMatrix, MatrixError> {
    if rows.is_empty() {
        return Err(MatrixError::Empty);
    }
    if let Some(r) = expected_rows {
        if rows.len() != r {
            return Err(MatrixError::Rows { found: rows.len(), expected: r });
        }
    }
    let width = |row: &Vec<ComplexEntry>| -> usize {
        let plain = row.iter().all(|e| matches!(e, ComplexEntry::Real(_)));
        match cols {
            Some(c) if plain && row.len() == 2 * c && row.len() != c => c,
            _ => row.len(),
        }
    };
    let ncols = cols.unwrap_or_else(|| width(&rows[0]));
    if ncols == 0 {
        return Err(MatrixError::Empty);
    }
    let mut out = CMatrix::zeros(rows.len(), ncols);
    for (r, row) in rows.iter().enumerate() {
        let found = width(row);
        if found != ncols {
            return Err(MatrixError::Ragged { row: r, found: row.len(), expected: ncols });
        }
        let interleaved = row.len() == 2 * ncols;
        for col in 0..ncols {
            let z = if interleaved {
                match (&row[2 * col], &row[2 * col + 1]) {
                    (ComplexEntry::Real(re), ComplexEntry::Real(im)) => Complex64::new(*re, *im),
                    _ => unreachable!("interleaved rows hold plain numbers"),
                }
            } else {
                row[col].value().map_err(|source| MatrixError::Entry { row: r, col, source })?
            };
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(MatrixError::NonFinite { row: r, col });
            }
            out[(r, col)] = z;
        }
    }
    Ok(out)
}

pub fn literal_from_matrix(m: &CMatrix) -> MatrixLiteral {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| ComplexEntry::from_value(m[(r, c)])).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn lit(json: &str) -> MatrixLiteral {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn entry_forms() {
        let m = matrix_from_literal(&lit(r#"[[1, [0, 2], "0.5-1i"]]"#), None, None).unwrap();
        assert_eq!(m[(0, 0)], c(1.0, 0.0));
        assert_eq!(m[(0, 1)], c(0.0, 2.0));
        assert_eq!(m[(0, 2)], c(0.5, -1.0));
    }

    #[test]
    fn interleaved_row_for_one_column() {
        let m = matrix_from_literal(&lit("[[1, 0]]"), None, Some(1)).unwrap();
        assert_eq!(m, CMatrix::from_element(1, 1, c(1.0, 0.0)));
        let m = matrix_from_literal(&lit("[[1, 0, 0, 1]]"), None, Some(2)).unwrap();
        assert_eq!(m[(0, 1)], c(0.0, 1.0));
        // Without a declared width the row is read as real entries.
        assert_eq!(matrix_from_literal(&lit("[[1, 0]]"), None, None).unwrap().ncols(), 2);
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(matrix_from_literal(&lit("[[1, 2], [3]]"), None, None), Err(MatrixError::Ragged { .. })));
        assert!(matches!(matrix_from_literal(&lit("[[1]]"), Some(2), None), Err(MatrixError::Rows { .. })));
        assert!(matches!(matrix_from_literal(&lit(r#"[["x"]]"#), None, None), Err(MatrixError::Entry { .. })));
        assert!(matches!(matrix_from_literal(&lit("[]"), None, None), Err(MatrixError::Empty)));
    }

    #[test]
    fn canonical_literal_round_trips() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.25, 0.0), c(0.1, -0.3), c(0.1, 0.3), c(1.0 / 3.0, 0.0)]);
        let back = matrix_from_literal(&literal_from_matrix(&m), Some(2), Some(2)).unwrap();
        assert_eq!(back, m);
    }
}
