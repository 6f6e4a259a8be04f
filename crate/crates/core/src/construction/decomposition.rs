use serde::{Deserialize, Serialize};

use crate::channels::TargetMap;
use crate::combs::{Comb, CombStructure};
use crate::error::{Error, Result};
use crate::labels::{input, output, OPEN_IN, OPEN_OUT};
use crate::tensor::{c, hermitian_basis, LabeledOperator, SpaceRegistry};

/// A one-slot probabilistic comb on `(I0, I1, O1, O0)` together with the
/// map it implements on unitaries and its nominal success probability.
#[derive(Clone, Debug, PartialEq)]
pub struct OneSlotComb {
    pub choi: LabeledOperator,
    pub target: TargetMap,
    pub nominal_p: f64,
}

impl OneSlotComb {
    pub fn new(choi: LabeledOperator, target: TargetMap, nominal_p: f64) -> Result<Self> {
        let labels = [OPEN_IN.to_string(), input(1), output(1), OPEN_OUT.to_string()];
        let choi = choi.reorder(&labels)?;
        let dims = choi.registry().dims();
        if dims[0] != dims[3] || dims[1] != dims[2] {
            return Err(Error::DimensionMismatch(format!("one-slot comb needs dims (d0, d, d, d0), got {dims:?}")));
        }
        Ok(Self { choi, target, nominal_p })
    }

    /// `J_id^{I0 I1} ⊗ J_id^{O1 O0}`: implements `U -> U` with probability 1.
    pub fn identity_wiring(d: usize) -> Result<Self> {
        let comb = crate::combs::identity_wiring_comb(1, d)?;
        Self::new(comb.into_choi(), TargetMap::Identity, 1.0)
    }

    pub fn d0(&self) -> usize {
        self.choi.registry().spaces()[0].dim
    }

    pub fn d(&self) -> usize {
        self.choi.registry().spaces()[1].dim
    }

    pub fn structure(&self) -> CombStructure {
        CombStructure { slots: 1, d: self.d(), d0: self.d0() }
    }

    pub fn as_comb(&self) -> Result<Comb> {
        Comb::new(self.structure(), self.choi.clone())
    }

    /// `Tr_{O0} S` on `(I0, I1, O1)`.
    pub fn reduced(&self) -> Result<LabeledOperator> {
        self.choi.partial_trace(&[OPEN_OUT])
    }
}

/// `Tr_{O0} S = I/d0 ⊗ Tr_{I0} + Σ α_ij h_i ⊗ g_j ⊗ I + Σ β_ij h_i ⊗ I ⊗ g_j
/// + Σ γ_ijk h_i ⊗ g_j ⊗ g_k`, indices starting at the first traceless element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneSlotDecomposition {
    pub d0: usize,
    pub d: usize,
    /// `I^{I0}/d0 ⊗ Tr_{I0} Tr_{O0} S` on `(I0, I1, O1)`
    #[serde(skip)]
    pub marginal: Option<LabeledOperator>,
    /// `Tr_{O0} S` on `(I0, I1, O1)`
    #[serde(skip)]
    pub reduced: Option<LabeledOperator>,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<Vec<f64>>>,
    pub reconstruction_residual: f64,
    pub max_gamma: f64,
    pub gamma_flagged: bool,
}

impl OneSlotDecomposition {
    pub fn marginal(&self) -> &LabeledOperator {
        self.marginal.as_ref().expect("marginal is set by decompose_one_slot")
    }

    pub fn reduced(&self) -> &LabeledOperator {
        self.reduced.as_ref().expect("reduced is set by decompose_one_slot")
    }
}

pub const GAMMA_TOL: f64 = 1e-9;
const RECONSTRUCTION_TOL: f64 = 1e-8;

fn on3(d0: usize, d: usize) -> SpaceRegistry {
    SpaceRegistry::new([(OPEN_IN.to_string(), d0), (input(1), d), (output(1), d)]).expect("distinct")
}

pub fn decompose_one_slot(s: &OneSlotComb) -> Result<OneSlotDecomposition> {
    let (d0, d) = (s.d0(), s.d());
    let reduced = s.reduced()?;
    let h = hermitian_basis(d0)?;
    let g = hermitian_basis(d)?;
    let id = |dim: usize| crate::tensor::CMatrix::identity(dim, dim);
    let norm = 1.0 / (d0 * d * d) as f64;
    let registry = on3(d0, d);
    let product = |a: &crate::tensor::CMatrix, b: &crate::tensor::CMatrix, e: &crate::tensor::CMatrix| {
        LabeledOperator::new(registry.clone(), a.kronecker(b).kronecker(e)).expect("dims match")
    };
    let overlap = |op: &LabeledOperator| -> Result<f64> { Ok(op.mul(&reduced)?.trace().re * norm) };

    let tr_i0 = reduced.partial_trace(&[OPEN_IN])?;
    let marginal = LabeledOperator::identity(SpaceRegistry::new([(OPEN_IN, d0)])?)
        .scaled(1.0 / d0 as f64)
        .tensor(&tr_i0)?;
    let mut rebuilt = marginal.clone();

    let (ni, nj) = (d0 * d0 - 1, d * d - 1);
    let mut alpha = vec![vec![0.0; nj]; ni];
    let mut beta = vec![vec![0.0; nj]; ni];
    let mut gamma = vec![vec![vec![0.0; nj]; nj]; ni];
    for i in 0..ni {
        let hi = h.get(i + 1);
        for j in 0..nj {
            let gj = g.get(j + 1);
            let pa = product(hi, gj, &id(d));
            alpha[i][j] = overlap(&pa)?;
            *rebuilt.matrix_mut() += pa.matrix() * c(alpha[i][j]);
            let pb = product(hi, &id(d), gj);
            beta[i][j] = overlap(&pb)?;
            *rebuilt.matrix_mut() += pb.matrix() * c(beta[i][j]);
            for k in 0..nj {
                let pg = product(hi, gj, g.get(k + 1));
                gamma[i][j][k] = overlap(&pg)?;
                *rebuilt.matrix_mut() += pg.matrix() * c(gamma[i][j][k]);
            }
        }
    }
    let reconstruction_residual = rebuilt.distance(&reduced)?;
    if reconstruction_residual > RECONSTRUCTION_TOL {
        return Err(Error::Decomposition(reconstruction_residual));
    }
    let max_gamma = gamma.iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(OneSlotDecomposition {
        d0,
        d,
        marginal: Some(marginal),
        reduced: Some(reduced),
        alpha,
        beta,
        gamma,
        reconstruction_residual,
        max_gamma,
        gamma_flagged: max_gamma > GAMMA_TOL,
    })
}

/// `Σ_i coeffs[i][j] h_{i+1}` as an operator on `label`.
pub(crate) fn weighted_h(coeffs: &[Vec<f64>], j: usize, d0: usize, label: &str) -> Result<LabeledOperator> {
    let h = hermitian_basis(d0)?;
    let mut m = crate::tensor::CMatrix::zeros(d0, d0);
    for (i, row) in coeffs.iter().enumerate() {
        m += h.get(i + 1) * c(row[j]);
    }
    LabeledOperator::on([(label, d0)], m)
}
