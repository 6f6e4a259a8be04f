use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use sod_core::tensor::{CMatrix, LabeledOperator, MatrixData};
use sod_core::{Error, Result};

/// Entries below this magnitude are dropped when sparsifying coefficients.
const SPARSE_CUTOFF: f64 = 1e-14;

/// A Hermitian matrix variable constrained to be PSD.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub dim: usize,
    /// Isometry `V` (`dim x r`) with every feasible `X = V Y V†`. The solver
    /// then works with the smaller PSD variable `Y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face: Option<MatrixData>,
}

impl Block {
    pub fn face_matrix(&self) -> Result<Option<CMatrix>> {
        let Some(data) = &self.face else { return Ok(None) };
        let v = data.to_matrix()?;
        if v.nrows() != self.dim || v.ncols() > self.dim {
            return Err(Error::DimensionMismatch(format!("face of block {} has shape {}x{}", self.name, v.nrows(), v.ncols())));
        }
        if (v.adjoint() * &v - CMatrix::identity(v.ncols(), v.ncols())).norm() > 1e-8 {
            return Err(Error::InvalidArgument(format!("face of block {} is not an isometry", self.name)));
        }
        Ok(Some(v))
    }
}

/// Sparse coefficient `H` of the real functional `X -> Tr(H X)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub dim: usize,
    /// `(row, col, H[row, col])`
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl Coefficient {
    pub fn from_matrix(h: &CMatrix) -> Self {
        let mut entries = Vec::new();
        for c in 0..h.ncols() {
            for r in 0..h.nrows() {
                let v = h[(r, c)];
                if v.norm() > SPARSE_CUTOFF {
                    entries.push((r, c, v));
                }
            }
        }
        Self { dim: h.nrows(), entries }
    }

    pub fn from_operator(op: &LabeledOperator) -> Self {
        Self::from_matrix(op.matrix())
    }

    pub fn entry(dim: usize, row: usize, col: usize, value: Complex64) -> Self {
        Self { dim, entries: vec![(row, col, value)] }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    /// `Re Tr(H X)`
    pub fn apply(&self, x: &CMatrix) -> f64 {
        self.entries.iter().map(|&(r, c, h)| (h * x[(c, r)]).re).sum()
    }
}

/// `Σ_b Re Tr(H_b X_b) + p_coeff · p = rhs`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    pub terms: Vec<(usize, Coefficient)>,
    pub p_coeff: f64,
    pub rhs: f64,
}

/// Maximize the free scalar `p` (or find any feasible point) over PSD blocks
/// subject to real affine equalities.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<Block>,
    pub constraints: Vec<Constraint>,
    /// When false the objective is zero and `p` only enters through constraints.
    pub maximize_p: bool,
}

impl SdpProblem {
    pub fn new(maximize_p: bool) -> Self {
        Self { blocks: Vec::new(), constraints: Vec::new(), maximize_p }
    }

    pub fn add_block(&mut self, name: impl Into<String>, dim: usize) -> usize {
        self.blocks.push(Block { name: name.into(), dim, face: None });
        self.blocks.len() - 1
    }

    /// Restricts block `b` to `X = V Y V†`.
    pub fn set_face(&mut self, b: usize, v: &CMatrix) {
        self.blocks[b].face = Some(MatrixData::from_matrix(v));
    }

    /// Adds the constraint unless every coefficient vanishes and `rhs = 0`.
    pub fn add_constraint(&mut self, c: Constraint) {
        if c.terms.iter().all(|(_, h)| h.is_zero()) && c.p_coeff == 0.0 && c.rhs == 0.0 {
            return;
        }
        self.constraints.push(c);
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        for b in &self.blocks {
            b.face_matrix()?;
        }
        for c in &self.constraints {
            if !c.p_coeff.is_finite() || !c.rhs.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite data in constraint {}", c.label)));
            }
            for (b, h) in &c.terms {
                let block = self.blocks.get(*b).ok_or_else(|| {
                    Error::InvalidArgument(format!("constraint {} refers to missing block {b}", c.label))
                })?;
                if h.dim != block.dim || h.entries.iter().any(|&(r, col, _)| r >= block.dim || col >= block.dim) {
                    return Err(Error::DimensionMismatch(format!(
                        "constraint {} does not fit block {} of dimension {}",
                        c.label, block.name, block.dim
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest `|lhs - rhs|` over all constraints.
    pub fn max_violation(&self, blocks: &[CMatrix], p: f64) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c.terms.iter().map(|(b, h)| h.apply(&blocks[*b])).sum::<f64>() + c.p_coeff * p;
                (lhs - c.rhs).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Orthonormal basis of the kernel of a PSD matrix `q`, as columns. A PSD
/// `X` with `Tr(q X) = 0` lives in this subspace.
pub fn psd_kernel(q: &CMatrix, rel_tol: f64) -> CMatrix {
    let n = q.nrows();
    let eig = q.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] <= rel_tol * top).collect();
    CMatrix::from_fn(n, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])])
}

/// Orthonormal basis of `m x m` Hermitian matrices: `E_rr`,
/// `(E_rc + E_cr)/√2` and `i(E_rc - E_cr)/√2` for `r < c`.
pub fn hermitian_unit_basis(m: usize) -> Vec<CMatrix> {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut out = Vec::with_capacity(m * m);
    for r in 0..m {
        let mut e = CMatrix::zeros(m, m);
        e[(r, r)] = Complex64::new(1.0, 0.0);
        out.push(e);
    }
    for r in 0..m {
        for c in r + 1..m {
            let mut e = CMatrix::zeros(m, m);
            e[(r, c)] = s;
            e[(c, r)] = s;
            out.push(e);
            let mut e = CMatrix::zeros(m, m);
            e[(r, c)] = s * Complex64::i();
            e[(c, r)] = -s * Complex64::i();
            out.push(e);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_basis_is_orthonormal() {
        let b = hermitian_unit_basis(3);
        assert_eq!(b.len(), 9);
        for (i, x) in b.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                let ip = (x * y).trace();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - Complex64::new(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn coefficient_apply_is_trace() {
        let b = hermitian_unit_basis(2);
        let x = CMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.5, -0.25), Complex64::new(0.5, 0.25), Complex64::new(2.0, 0.0)],
        );
        for e in &b {
            let h = Coefficient::from_matrix(e);
            assert!((h.apply(&x) - (e * &x).trace().re).abs() < 1e-15);
        }
    }

    #[test]
    fn validate_catches_bad_block() {
        let mut p = SdpProblem::new(false);
        p.add_block("X", 2);
        p.add_constraint(Constraint {
            label: "bad".into(),
            terms: vec![(0, Coefficient::entry(2, 2, 0, Complex64::new(1.0, 0.0)))],
            p_coeff: 0.0,
            rhs: 1.0,
        });
        assert!(p.validate().is_err());
        let mut q = SdpProblem::new(false);
        q.add_constraint(Constraint {
            label: "missing".into(),
            terms: vec![(0, Coefficient::entry(1, 0, 0, Complex64::new(1.0, 0.0)))],
            p_coeff: 0.0,
            rhs: 1.0,
        });
        assert!(q.validate().is_err());
    }

    #[test]
    fn kernel_of_projector() {
        let mut q = CMatrix::zeros(3, 3);
        q[(0, 0)] = Complex64::new(2.0, 0.0);
        let k = psd_kernel(&q, 1e-10);
        assert_eq!(k.ncols(), 2);
        assert!((&q * &k).norm() < 1e-14);
        let mut p = SdpProblem::new(false);
        let b = p.add_block("X", 3);
        p.set_face(b, &k);
        assert!(p.validate().is_ok());
        p.set_face(b, &(k * Complex64::new(2.0, 0.0)));
        assert!(p.validate().is_err());
    }

    #[test]
    fn trivial_constraints_are_skipped() {
        let mut p = SdpProblem::new(false);
        p.add_block("X", 2);
        p.add_constraint(Constraint { label: "zero".into(), terms: vec![(0, Coefficient::from_matrix(&CMatrix::zeros(2, 2)))], p_coeff: 0.0, rhs: 0.0 });
        assert!(p.constraints.is_empty());
    }
}
