use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{antisymmetric_vector, c, hermitian_basis, CMatrix, LabeledOperator, SpaceRegistry};

/// Expansion coefficients of `d^d A_d` in the product basis
/// `g_{k_1} ⊗ ... ⊗ g_{k_d}`, grouped by the position `m` of the last
/// traceless factor. The group `m` only stores tuples of length `m` ending in
/// a nonzero index, so every coefficient with `k_m = 0` is zero by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntisymCoefficients {
    pub d: usize,
    /// `groups[m - 2]` holds `(k_1..k_m, a_{m,k})` for `m = 2..=d`.
    pub groups: Vec<Vec<(Vec<usize>, f64)>>,
    /// Coefficient of `I^{⊗d}` (must be 1).
    pub constant: f64,
    /// Largest `|a|` over tuples with exactly one traceless factor, in front.
    pub max_single: f64,
}

const ZERO_TOL: f64 = 1e-12;

impl AntisymCoefficients {
    pub fn group(&self, m: usize) -> &[(Vec<usize>, f64)] {
        &self.groups[m - 2]
    }

    pub fn coefficient(&self, k: &[usize]) -> f64 {
        let m = k.len();
        if m < 2 || m > self.d {
            return 0.0;
        }
        self.group(m).iter().find(|(t, _)| t == k).map_or(0.0, |(_, a)| *a)
    }

    /// `X_m = Σ_k a_{m,k} g_{k_1} ⊗ ... ⊗ g_{k_m}` on the first `m` of `labels`.
    pub fn group_operator(&self, m: usize, labels: &[String]) -> Result<LabeledOperator> {
        let g = hermitian_basis(self.d)?;
        let dim = self.d.pow(m as u32);
        let mut acc = CMatrix::zeros(dim, dim);
        for (k, a) in self.group(m) {
            let mut term = CMatrix::from_element(1, 1, c(*a));
            for &ki in k {
                term = term.kronecker(g.get(ki));
            }
            acc += term;
        }
        LabeledOperator::new(SpaceRegistry::new(labels[..m].iter().map(|l| (l.clone(), self.d)))?, acc)
    }

    /// `I^{⊗d} + Σ_m X_m ⊗ I`, which should equal `d^d A_d`.
    pub fn cascade_operator(&self, labels: &[String]) -> Result<LabeledOperator> {
        let registry = SpaceRegistry::new(labels[..self.d].iter().map(|l| (l.clone(), self.d)))?;
        let mut acc = LabeledOperator::identity(registry);
        for m in 2..=self.d {
            acc.add_embedded(&self.group_operator(m, labels)?, 1.0)?;
        }
        Ok(acc)
    }
}

/// `<A_d| g_{k_1} ⊗ ... ⊗ g_{k_d} |A_d>` for every index tuple, which is the
/// coefficient of that product in `d^d A_d` since `Tr g_i g_j = d δ_ij`.
pub fn antisym_coefficients(d: usize) -> Result<AntisymCoefficients> {
    let g = hermitian_basis(d)?;
    let v = antisymmetric_vector(d)?;
    let support: Vec<(Vec<usize>, num_complex::Complex64)> = v
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() > 0.0)
        .map(|(flat, a)| (digits(flat, d, d), *a))
        .collect();
    let n = d * d;
    let mut groups = vec![Vec::new(); d - 1];
    let mut constant = 0.0;
    let mut max_single = 0.0f64;
    for flat in 0..n.pow(d as u32) {
        let k = digits(flat, n, d);
        let mut value = c(0.0);
        for (x, ax) in &support {
            for (y, ay) in &support {
                let mut term = ax.conj() * ay;
                for (pos, &ki) in k.iter().enumerate() {
                    term *= g.get(ki)[(x[pos], y[pos])];
                }
                value += term;
            }
        }
        if value.im.abs() > 1e-10 {
            return Err(Error::Internal(format!("antisymmetric coefficient {k:?} has imaginary part {}", value.im)));
        }
        let a = value.re;
        let last = k.iter().rposition(|&ki| ki != 0);
        match last {
            None => constant = a,
            Some(0) => max_single = max_single.max(a.abs()),
            Some(pos) if a.abs() > ZERO_TOL => groups[pos - 1].push((k[..=pos].to_vec(), a)),
            Some(_) => {}
        }
    }
    if (constant - 1.0).abs() > 1e-10 || max_single > 1e-10 {
        return Err(Error::Internal(format!(
            "antisymmetric expansion violates the causal requirement: constant {constant}, single-factor {max_single}"
        )));
    }
    Ok(AntisymCoefficients { d, groups, constant, max_single })
}

/// Base-`base` digits of `flat`, most significant first, padded to `len`.
fn digits(mut flat: usize, base: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0; len];
    for slot in out.iter_mut().rev() {
        *slot = flat % base;
        flat /= base;
    }
    out
}
