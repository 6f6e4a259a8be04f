use nalgebra::DVector;
use num_complex::Complex64;

use crate::channels::phi_plus;
use crate::error::{Error, Result};
use crate::tensor::{c, hermitian_basis, min_eigenvalue_on_support, CMatrix, LabeledOperator, SpaceRegistry};

/// Extension of `M^{AB}` by a copy `C` of `A`.
#[derive(Clone, Debug)]
pub struct LiftResult {
    /// On `(A, B..., C)`.
    pub m_abc: LabeledOperator,
    /// `A_k = |φ+><a_k|` on `(A, C)`, one per basis element `h_k`.
    pub a_ops: Vec<LabeledOperator>,
    pub a_vectors: Vec<DVector<Complex64>>,
    /// `alpha[k][i][j - 1] = Tr[(h_i ⊗ h_j) A_k] / d0²` for `j >= 1`.
    pub alpha: Vec<Vec<Vec<Complex64>>>,
    /// `φ+^{AC} ⊗ Π + I^{AC} ⊗ Π⊥`, on the registry of `m_abc`.
    pub support: LabeledOperator,
    pub min_eigenvalue_on_support: f64,
    pub trace_c_residual: f64,
    pub support_residual: f64,
    pub neutralization_residual: f64,
}

/// Splits the registry of `m_ab` into the single space outside `projector` (A)
/// and the projector's spaces (B).
fn split(m_ab: &LabeledOperator, projector: &LabeledOperator) -> Result<(String, usize)> {
    let b: Vec<&str> = projector.registry().labels().collect();
    let rest = m_ab.registry().without(&b)?;
    if rest.len() != 1 {
        return Err(Error::InvalidArgument(format!(
            "lift needs exactly one space outside the projector, found {}",
            rest.len()
        )));
    }
    let a = &rest.spaces()[0];
    Ok((a.label.clone(), a.dim))
}

/// Solves `Tr[(h_{k'} ⊗ I) |φ+><a_k|] = d0² δ_{kk'}` for every `k`. The map
/// `a -> (Tr[(h_{k'} ⊗ I)|φ+><a|])_{k'}` is `d0² x d0²` and invertible, so
/// each `a_k` is unique.
fn solve_a_vectors(d0: usize) -> Result<Vec<DVector<Complex64>>> {
    let h = hermitian_basis(d0)?;
    let n = d0 * d0;
    let phi = {
        let mut v = DVector::zeros(n);
        for i in 0..d0 {
            v[i * d0 + i] = c(1.0 / (d0 as f64).sqrt());
        }
        v
    };
    // Row k' holds the linear functional b -> <b|(h_{k'} ⊗ I)|φ+>, where b = a.
    let id = CMatrix::identity(d0, d0);
    let mut system = CMatrix::zeros(n, n);
    for kp in 0..n {
        let w = h.get(kp).kronecker(&id) * &phi;
        for col in 0..n {
            system[(kp, col)] = w[col];
        }
    }
    let lu = system.lu();
    (0..n)
        .map(|k| {
            let mut rhs = DVector::zeros(n);
            rhs[k] = c((n) as f64);
            // Tr[(h ⊗ I)|φ+><a|] = <a|(h ⊗ I)|φ+> = Σ conj(a_m) w_m
            let conj_a = lu.solve(&rhs).ok_or_else(|| Error::Internal("singular lift system".into()))?;
            Ok(conj_a.map(|z| z.conj()))
        })
        .collect()
}

/// Builds `M^{ABC}` with `Tr_C M^{ABC} = M^{AB}`, support inside `Psup` and
/// `Π M^{ABC} Π ∝ J_id^{AC}`, given `Π M^{AB} Π = I^A/d0 ⊗ Tr_A(Π M^{AB} Π)`.
pub fn lift_neutral(m_ab: &LabeledOperator, projector: &LabeledOperator, c_label: &str) -> Result<LiftResult> {
    let (a_label, d0) = split(m_ab, projector)?;
    let b_registry = projector.registry().clone();
    let ab = SpaceRegistry::new([(a_label.clone(), d0)])?.concat(&b_registry)?;
    let m_ab = m_ab.aligned_to(&ab)?;
    let p = projector.matrix().clone();
    let q = CMatrix::identity(p.nrows(), p.ncols()) - &p;
    let pp = LabeledOperator::identity(SpaceRegistry::new([(a_label.as_str(), d0)])?).tensor(projector)?;

    let sandwiched = pp.mul(&m_ab)?.mul(&pp)?;
    let reduced = sandwiched.partial_trace(&[&a_label])?;
    let id_a = LabeledOperator::identity(SpaceRegistry::new([(a_label.as_str(), d0)])?);
    let pre = sandwiched.distance(&id_a.scaled(1.0 / d0 as f64).tensor(&reduced)?)?;
    if pre > 1e-9 * m_ab.frobenius_norm().max(1.0) {
        return Err(Error::Precondition { what: "Π M Π = I^A/d0 ⊗ Tr_A(Π M Π)".into(), residual: pre });
    }

    let h = hermitian_basis(d0)?;
    let n = d0 * d0;
    let inv = c(1.0 / d0 as f64);
    // M_i^B = Tr_A[(h_i ⊗ I) M^{AB}] / d0
    let blocks: Vec<CMatrix> = (0..n)
        .map(|i| Ok(m_ab.contract(&h.labeled(i, &a_label))?.into_matrix() * inv))
        .collect::<Result<_>>()?;

    let a_vectors = solve_a_vectors(d0)?;
    let phi_vec = {
        let mut v = DVector::<Complex64>::zeros(n);
        for i in 0..d0 {
            v[i * d0 + i] = c(1.0 / (d0 as f64).sqrt());
        }
        v
    };
    let a_mats: Vec<CMatrix> = a_vectors.iter().map(|a| &phi_vec * a.adjoint()).collect();
    let alpha = a_mats
        .iter()
        .map(|ak| {
            (0..n)
                .map(|i| {
                    (1..n).map(|j| (h.get(i).kronecker(h.get(j)) * ak).trace() / c((n) as f64)).collect()
                })
                .collect()
        })
        .collect();

    // Assemble on (A, C, B), then reorder to (A, B, C).
    let id_d0 = CMatrix::identity(d0, d0);
    let j_id = phi_plus(d0) * c(d0 as f64);
    let id_ac = CMatrix::identity(n, n);
    let mut m = j_id.kronecker(&(&p * &blocks[0] * &p));
    m += id_ac.kronecker(&(&q * &blocks[0] * &q)) * inv;
    for i in 1..n {
        m += h.get(i).kronecker(&id_d0).kronecker(&(&q * &blocks[i] * &q)) * inv;
    }
    for k in 0..n {
        m += a_mats[k].kronecker(&(&p * &blocks[k] * &q)) * inv;
        m += a_mats[k].adjoint().kronecker(&(&q * &blocks[k] * &p)) * inv;
    }
    let acb = SpaceRegistry::new([(a_label.clone(), d0), (c_label.to_string(), d0)])?.concat(&b_registry)?;
    let abc = ab.concat(&SpaceRegistry::new([(c_label, d0)])?)?;
    let m_abc = LabeledOperator::new(acb.clone(), m)?.aligned_to(&abc)?;
    let support = LabeledOperator::new(acb, phi_plus(d0).kronecker(&p) + id_ac.kronecker(&q))?.aligned_to(&abc)?;

    let trace_c_residual = m_abc.partial_trace(&[c_label])?.distance(&m_ab)?;
    let support_residual = support.mul(&m_abc)?.mul(&support)?.distance(&m_abc)?;
    let neutralization_residual = neutralization_residual(&m_abc, projector, &a_label, c_label)?;
    let a_ops = a_mats
        .into_iter()
        .map(|a| LabeledOperator::on([(a_label.as_str(), d0), (c_label, d0)], a))
        .collect::<Result<_>>()?;
    let min_eig = min_eigenvalue_on_support(&m_abc, &support)?;
    Ok(LiftResult {
        m_abc,
        a_ops,
        a_vectors,
        alpha,
        support,
        min_eigenvalue_on_support: min_eig,
        trace_c_residual,
        support_residual,
        neutralization_residual,
    })
}

/// `‖Π M Π - (1/d0) J_id^{AC} ⊗ Tr_{AC}(Π M Π)‖`
pub fn neutralization_residual(m_abc: &LabeledOperator, projector: &LabeledOperator, a: &str, c_label: &str) -> Result<f64> {
    let d0 = m_abc.registry().dim_of(a)?;
    let wire = LabeledOperator::on([(a, d0), (c_label, d0)], phi_plus(d0))?;
    let pp = LabeledOperator::identity(SpaceRegistry::new([(a, d0), (c_label, d0)])?).tensor(projector)?;
    let sandwiched = pp.mul(m_abc)?.mul(&pp)?;
    let reduced = sandwiched.partial_trace(&[a, c_label])?;
    // J_id / d0 = φ+
    sandwiched.distance(&wire.tensor(&reduced)?)
}
