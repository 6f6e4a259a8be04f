use nalgebra::{DVector, SymmetricEigen};

use super::{CMatrix, LabeledOperator};
use crate::error::{Error, Result};

/// Relative Hermiticity tolerance at predicate entry.
pub const HERMITIAN_TOL: f64 = 1e-10;

fn check_hermitian(a: &CMatrix) -> Result<()> {
    let residual = (a - a.adjoint()).norm();
    if residual > HERMITIAN_TOL * a.norm().max(1.0) {
        return Err(Error::NotHermitian(residual));
    }
    Ok(())
}

/// Eigen-decomposition of the Hermitian part; eigenvalues ascending.
pub fn eigh(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    check_hermitian(a)?;
    let herm = (a + a.adjoint()) * super::c(0.5);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_columns(
        &order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
    );
    Ok((values, vectors))
}

fn min_eig_matrix(a: &CMatrix) -> Result<f64> {
    check_hermitian(a)?;
    if a.nrows() == 0 {
        return Ok(f64::INFINITY);
    }
    let herm = (a + a.adjoint()) * super::c(0.5);
    Ok(herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn min_eigenvalue(a: &LabeledOperator) -> Result<f64> {
    min_eig_matrix(a.matrix())
}

pub fn is_psd(a: &LabeledOperator, tol: f64) -> Result<bool> {
    Ok(min_eigenvalue(a)? >= -tol)
}

/// Orthonormal columns spanning the range of a (near-)projector.
pub fn range_basis(projector: &CMatrix) -> Result<CMatrix> {
    let (values, vectors) = eigh(projector)?;
    let cols: Vec<DVector<_>> = values
        .iter()
        .zip(vectors.column_iter())
        .filter(|(v, _)| **v > 0.5)
        .map(|(_, col)| col.into_owned())
        .collect();
    if cols.is_empty() {
        return Ok(CMatrix::zeros(projector.nrows(), 0));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// Smallest eigenvalue of `V^dagger A V` where `V` spans the range of `support`.
pub fn min_eigenvalue_on_support(a: &LabeledOperator, support: &LabeledOperator) -> Result<f64> {
    let support = support.aligned_to(a.registry())?;
    let v = range_basis(support.matrix())?;
    min_eig_matrix(&(v.adjoint() * a.matrix() * &v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{c, SpaceRegistry, ONE, ZERO};

    #[test]
    fn identity_and_pauli_z() {
        let reg = SpaceRegistry::new([("A", 2)]).unwrap();
        assert!((min_eigenvalue(&LabeledOperator::identity(reg.clone())).unwrap() - 1.0).abs() < 1e-15);
        let z = LabeledOperator::new(reg, CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])).unwrap();
        assert!((min_eigenvalue(&z).unwrap() + 1.0).abs() < 1e-15);
        assert!(!is_psd(&z, 1e-9).unwrap());
    }

    #[test]
    fn non_hermitian_rejected() {
        let reg = SpaceRegistry::new([("A", 2)]).unwrap();
        let m = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]);
        let a = LabeledOperator::new(reg, m).unwrap();
        assert!(matches!(min_eigenvalue(&a), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn eigh_sorted_and_reconstructs() {
        let m = CMatrix::from_fn(5, 5, |i, j| c((i as f64 - j as f64).powi(2) + if i == j { 1.0 } else { 0.0 }));
        let (vals, vecs) = eigh(&m).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let diag = CMatrix::from_diagonal(&DVector::from_iterator(5, vals.iter().map(|&v| c(v))));
        assert!((&vecs * diag * vecs.adjoint() - m).norm() < 1e-12);
    }
}
