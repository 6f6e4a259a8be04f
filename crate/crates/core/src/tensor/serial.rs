use serde::{Deserialize, Serialize};

use super::{CMatrix, LabeledOperator, Space, SpaceRegistry};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Row-major real and imaginary parts; `im` may be omitted for real matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixData {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixData {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        let im = m.iter().any(|z| z.im != 0.0).then(|| rows(|z| z.im));
        Self { re: rows(|z| z.re), im }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.re.len();
        let m = self.re.first().map_or(0, Vec::len);
        let ragged = |rows: &Vec<Vec<f64>>| rows.len() != n || rows.iter().any(|r| r.len() != m);
        if ragged(&self.re) || self.im.as_ref().is_some_and(ragged) {
            return Err(Error::DimensionMismatch("matrix rows have inconsistent lengths".into()));
        }
        Ok(CMatrix::from_fn(n, m, |i, j| {
            Complex64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        }))
    }
}

/// A labeled operator in file form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorData {
    pub spaces: Vec<Space>,
    #[serde(flatten)]
    pub matrix: MatrixData,
}

impl OperatorData {
    pub fn from_operator(op: &LabeledOperator) -> Self {
        Self { spaces: op.registry().spaces().to_vec(), matrix: MatrixData::from_matrix(op.matrix()) }
    }

    pub fn to_operator(&self) -> Result<LabeledOperator> {
        LabeledOperator::new(SpaceRegistry::from_spaces(self.spaces.clone())?, self.matrix.to_matrix()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = CMatrix::from_fn(3, 3, |i, j| Complex64::new(0.1 * i as f64 - 1.0 / 3.0, (j as f64).sqrt()));
        let op = LabeledOperator::on([("a", 3)], m).unwrap();
        let data = OperatorData::from_operator(&op);
        let json = serde_json::to_string(&data).unwrap();
        let back: OperatorData = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_operator().unwrap(), op);
    }

    #[test]
    fn real_matrix_omits_imaginary_part() {
        let data = MatrixData::from_matrix(&CMatrix::identity(2, 2));
        assert!(data.im.is_none());
        assert_eq!(data.to_matrix().unwrap(), CMatrix::identity(2, 2));
    }

    #[test]
    fn ragged_rows_rejected() {
        let data = MatrixData { re: vec![vec![1.0, 0.0], vec![0.0]], im: None };
        assert!(data.to_matrix().is_err());
    }
}
