use serde::{Deserialize, Serialize};

use crate::channels::phi_plus;
use crate::error::{Error, Result};
use crate::labels::{OPEN_IN, OPEN_OUT};
use crate::tensor::perm::slot_permutation_on;
use crate::tensor::{
    all_permutations, c, hermitian_basis, min_eigenvalue, permutation_operator, symmetric_sandwich, CMatrix,
    LabeledOperator, SpaceRegistry,
};

/// Neutral part built from a permutation mixture of `Tr_{O0} N`, valid when
/// the slots may be used in any (classically mixed) order.
#[derive(Clone, Debug)]
pub struct IcoNeutral {
    /// On `(I0, I1, O1, ..., IK, OK, O0)`.
    pub n: LabeledOperator,
    /// `J_id = I ⊗ I/d0 + (1/d0) Σ η_ij h_i ⊗ h_j`, indices from 1.
    pub eta: Vec<Vec<f64>>,
    pub permuted: Vec<LabeledOperator>,
    pub weights: Vec<f64>,
    /// `J_id/d0 ⊗ avg_σ Tr_{I0}(Π N_σ Π)`
    pub symmetric_part: LabeledOperator,
    /// `avg_σ Π⊥ N_σ Π⊥ ⊗ I^{O0}/d0`
    pub complement_part: LabeledOperator,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcoReport {
    pub min_eigenvalue: f64,
    pub min_eigenvalue_symmetric_part: f64,
    pub min_eigenvalue_complement_part: f64,
    /// `‖N - symmetric_part - complement_part‖`
    pub split_residual: f64,
    /// `‖Π N Π - (1/d0) J_id ⊗ Tr_{I0 O0}(Π N Π)‖`
    pub neutralization_residual: f64,
    /// `‖Tr_{O0} N - avg_σ N_σ‖`
    pub marginal_residual: f64,
    /// `‖Π (avg_σ N_σ) Π⊥‖`
    pub block_residual: f64,
    /// `‖J_id - I⊗I/d0 - (1/d0) Σ η_ij h_i ⊗ h_j‖`
    pub eta_residual: f64,
}

/// `η_ij = Tr(h_i h_j^T) / d0`
pub fn eta_coefficients(d0: usize) -> Result<Vec<Vec<f64>>> {
    let h = hermitian_basis(d0)?;
    Ok((1..d0 * d0)
        .map(|i| (1..d0 * d0).map(|j| (h.get(i) * h.get(j).transpose()).trace().re / d0 as f64).collect())
        .collect())
}

/// `Π X = avg_σ P_σ X` with `Π` the normalized slot projector.
fn left_project(x: &LabeledOperator, slots: usize) -> Result<LabeledOperator> {
    let perms = all_permutations(slots);
    let w = c(1.0 / perms.len() as f64);
    let mut acc = LabeledOperator::zeros(x.registry().clone());
    for sigma in &perms {
        let p = permutation_operator(x.registry(), &slot_permutation_on(x.registry(), sigma)?)?;
        *acc.matrix_mut() += p.matrix() * x.matrix() * w;
    }
    Ok(acc)
}

/// `Π X Π⊥ = Π X - Π X Π`
fn off_block(x: &LabeledOperator, slots: usize) -> Result<LabeledOperator> {
    left_project(x, slots)?.sub(&symmetric_sandwich(x, slots)?)
}

pub fn build_ico_neutral(partial: &LabeledOperator, slots: usize) -> Result<IcoNeutral> {
    let d0 = partial.registry().dim_of(OPEN_IN)?;
    if partial.registry().contains(OPEN_OUT) {
        return Err(Error::InvalidArgument("expected the O0-traced operator".into()));
    }
    let perms = all_permutations(slots);
    let weights = vec![1.0 / perms.len() as f64; perms.len()];
    let permuted = perms.iter().map(|s| partial.permute_slots(s)).collect::<Result<Vec<_>>>()?;
    let mut avg = LabeledOperator::zeros(partial.registry().clone());
    for (p, w) in permuted.iter().zip(&weights) {
        *avg.matrix_mut() += p.matrix() * c(*w);
    }
    let eta = eta_coefficients(d0)?;
    let h = hermitian_basis(d0)?;
    let out_space = SpaceRegistry::new([(OPEN_OUT, d0)])?;

    // N = avg ⊗ I/d0 + (1/d0) Σ η_ij (h_i ⊗ I) Π avg Π ⊗ h_j
    let sym = symmetric_sandwich(&avg, slots)?;
    let mut n = avg.tensor(&LabeledOperator::identity(out_space.clone()).scaled(1.0 / d0 as f64))?;
    for i in 1..d0 * d0 {
        let hi = h.labeled(i, OPEN_IN).embed(partial.registry())?;
        let left = hi.mul(&sym)?;
        for j in 1..d0 * d0 {
            let eta_ij = eta[i - 1][j - 1];
            if eta_ij == 0.0 {
                continue;
            }
            let hj = h.labeled(j, OPEN_OUT);
            *n.matrix_mut() += left.tensor(&hj)?.matrix() * c(eta_ij / d0 as f64);
        }
    }

    let wire = LabeledOperator::on([(OPEN_IN, d0), (OPEN_OUT, d0)], phi_plus(d0))?;
    let symmetric_part = wire.tensor(&sym.partial_trace(&[OPEN_IN])?)?;
    // Π⊥ X Π⊥ = X - Π X - X Π + Π X Π, with X Π = (Π X)† for Hermitian X
    let px = left_project(&avg, slots)?;
    let complement = avg.sub(&px)?.sub(&px.adjoint())?.add(&sym)?;
    let complement_part = complement.tensor(&LabeledOperator::identity(out_space).scaled(1.0 / d0 as f64))?;
    let registry = n.registry().clone();
    Ok(IcoNeutral {
        n,
        eta,
        permuted,
        weights,
        symmetric_part: symmetric_part.aligned_to(&registry)?,
        complement_part: complement_part.aligned_to(&registry)?,
    })
}

impl IcoNeutral {
    pub fn slots(&self) -> usize {
        (self.n.registry().len() - 2) / 2
    }

    pub fn report(&self) -> Result<IcoReport> {
        let slots = self.slots();
        let d0 = self.n.registry().dim_of(OPEN_IN)?;
        let sym = symmetric_sandwich(&self.n, slots)?;
        let wire = LabeledOperator::on([(OPEN_IN, d0), (OPEN_OUT, d0)], phi_plus(d0))?;
        let neutralization_residual = sym.distance(&wire.tensor(&sym.partial_trace(&[OPEN_IN, OPEN_OUT])?)?)?;
        let mut avg = LabeledOperator::zeros(self.permuted[0].registry().clone());
        for (p, w) in self.permuted.iter().zip(&self.weights) {
            *avg.matrix_mut() += p.matrix() * c(*w);
        }
        let marginal_residual = self.n.partial_trace(&[OPEN_OUT])?.distance(&avg)?;
        let block_residual = off_block(&avg, slots)?.frobenius_norm();
        let split_residual = self.n.distance(&self.symmetric_part.add(&self.complement_part)?)?;

        let h = hermitian_basis(d0)?;
        let mut rebuilt = CMatrix::identity(d0 * d0, d0 * d0) * c(1.0 / d0 as f64);
        for i in 1..d0 * d0 {
            for j in 1..d0 * d0 {
                rebuilt += h.get(i).kronecker(h.get(j)) * c(self.eta[i - 1][j - 1] / d0 as f64);
            }
        }
        let eta_residual = (rebuilt - phi_plus(d0) * c(d0 as f64)).norm();
        Ok(IcoReport {
            min_eigenvalue: min_eigenvalue(&self.n)?,
            min_eigenvalue_symmetric_part: min_eigenvalue(&self.symmetric_part)?,
            min_eigenvalue_complement_part: min_eigenvalue(&self.complement_part)?,
            split_residual,
            neutralization_residual,
            marginal_residual,
            block_residual,
            eta_residual,
        })
    }
}
