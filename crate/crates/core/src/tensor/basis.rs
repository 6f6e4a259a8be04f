use nalgebra::DVector;
use num_complex::Complex64;

use super::{c, perm::all_permutations, CMatrix, LabeledOperator, SpaceRegistry, ZERO};
use crate::error::{Error, Result};

/// Hermitian operator basis `g_0 = I, g_1, ..., g_{d^2-1}` with traceless
/// `g_i` (i >= 1) and `Tr(g_i g_j) = d δ_ij`.
///
/// The traceless part is the generalized Gell-Mann family rescaled by
/// `sqrt(d/2)`; for `d = 2` it is `{I, X, Y, Z}`, for `d = 3` the usual
/// Gell-Mann ordering `λ1..λ8`.
#[derive(Clone, Debug)]
pub struct HermBasis {
    d: usize,
    mats: Vec<CMatrix>,
}

pub fn hermitian_basis(d: usize) -> Result<HermBasis> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("Hermitian basis needs d >= 2, got {d}")));
    }
    let scale = (d as f64 / 2.0).sqrt();
    let mut mats = vec![CMatrix::identity(d, d)];
    for k in 1..d {
        for j in 0..k {
            let mut sym = CMatrix::zeros(d, d);
            sym[(j, k)] = c(scale);
            sym[(k, j)] = c(scale);
            mats.push(sym);
            let mut anti = CMatrix::zeros(d, d);
            anti[(j, k)] = Complex64::new(0.0, -scale);
            anti[(k, j)] = Complex64::new(0.0, scale);
            mats.push(anti);
        }
        let norm = (2.0 / (k * (k + 1)) as f64).sqrt() * scale;
        let mut diag = CMatrix::zeros(d, d);
        for l in 0..k {
            diag[(l, l)] = c(norm);
        }
        diag[(k, k)] = c(-(k as f64) * norm);
        mats.push(diag);
    }
    Ok(HermBasis { d, mats })
}

impl HermBasis {
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of elements, `d^2`.
    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    pub fn get(&self, i: usize) -> &CMatrix {
        &self.mats[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &CMatrix> {
        self.mats.iter()
    }

    /// Basis element as an operator on a single named space.
    pub fn labeled(&self, i: usize, label: &str) -> LabeledOperator {
        LabeledOperator::on([(label, self.d)], self.mats[i].clone()).expect("shape matches by construction")
    }

    /// Coefficients `c_i = Tr(g_i H) / d`, so that `H = sum_i c_i g_i`.
    pub fn coefficients(&self, h: &CMatrix) -> Vec<Complex64> {
        self.mats.iter().map(|g| (g * h).trace() / c(self.d as f64)).collect()
    }

    pub fn reconstruct(&self, coeffs: &[Complex64]) -> CMatrix {
        let mut acc = CMatrix::zeros(self.d, self.d);
        for (g, &w) in self.mats.iter().zip(coeffs) {
            acc += g * w;
        }
        acc
    }
}

/// `|A_d> = (1/sqrt(d!)) sum_sigma sgn(sigma) |sigma(0), ..., sigma(d-1)>` on `d` qudits.
pub fn antisymmetric_vector(d: usize) -> Result<DVector<Complex64>> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("antisymmetric state needs d >= 2, got {d}")));
    }
    let total = d.pow(d as u32);
    let perms = all_permutations(d);
    let amp = 1.0 / (perms.len() as f64).sqrt();
    let mut v = DVector::from_element(total, ZERO);
    for p in &perms {
        let index = p.images().iter().fold(0, |acc, &x| acc * d + x);
        v[index] = c(p.sign() * amp);
    }
    Ok(v)
}

/// Rank-one projector `|A_d><A_d|` on spaces `A1, ..., Ad`.
pub fn antisymmetric_state(d: usize) -> Result<LabeledOperator> {
    let v = antisymmetric_vector(d)?;
    let registry = SpaceRegistry::new((1..=d).map(|k| (format!("A{k}"), d)))?;
    LabeledOperator::new(registry, &v * v.adjoint())
}
