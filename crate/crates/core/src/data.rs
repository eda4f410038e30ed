use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A matrix of observations (rows) by dimensions (columns) with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: DMatrix<f64>,
    source: String,
}

impl Sample {
    /// Wraps an observation matrix; every entry must be finite and at least one
    /// row present.
    pub fn new(data: DMatrix<f64>, source: impl Into<String>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "sample must have at least one row and one column".into(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "sample contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            data,
            source: source.into(),
        })
    }

    /// Builds a sample from row-major values.
    pub fn from_rows(rows: &[Vec<f64>], source: impl Into<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("sample has no rows".into()));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("ragged sample rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(rows.len(), dim, &flat), source)
    }

    /// Number of observations.
    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Dimensionality of each observation.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Observation `i` as a column vector.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.data.row(i).transpose()
    }

    /// Single named column as a new one-dimensional sample.
    pub fn column(&self, j: usize) -> Result<Sample> {
        if j >= self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: j,
            });
        }
        Sample::new(
            DMatrix::from_column_slice(self.n(), 1, self.data.column(j).as_slice()),
            format!("{} [column {}]", self.source, j),
        )
    }
}
