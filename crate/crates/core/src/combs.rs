//! Quantum combs on `I0, I1, O1, ..., IK, OK, O0`: causal validation,
//! application to channels and the neutralization / success checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{choi_of_unitary, phi_plus, Channel};
use crate::error::{Error, Result};
use crate::labels::{self, OPEN_IN, OPEN_OUT};
use crate::tensor::{
    c, min_eigenvalue, symmetric_sandwich, tensor_all, CMatrix, LabeledOperator, MatrixData,
    SpaceRegistry,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombStructure {
    pub slots: usize,
    pub d: usize,
    pub d0: usize,
}

impl CombStructure {
    pub fn new(slots: usize, d: usize, d0: usize) -> Result<Self> {
        if slots == 0 || d == 0 || d0 == 0 {
            return Err(Error::InvalidArgument(format!(
                "comb needs K, d, d0 >= 1, got K={slots} d={d} d0={d0}"
            )));
        }
        Ok(Self { slots, d, d0 })
    }

    pub fn labels(&self) -> Vec<String> {
        labels::comb_labels(self.slots)
    }

    pub fn slot_labels(&self) -> Vec<String> {
        labels::slot_labels(self.slots)
    }

    pub fn registry(&self) -> SpaceRegistry {
        let labels = self.labels();
        let last = labels.len() - 1;
        SpaceRegistry::new(labels.into_iter().enumerate().map(|(k, l)| {
            let dim = if k == 0 || k == last { self.d0 } else { self.d };
            (l, dim)
        }))
        .expect("comb labels are distinct")
    }

    pub fn total_dim(&self) -> usize {
        self.d0 * self.d0 * self.d.pow(2 * self.slots as u32)
    }

    /// `Tr C` of a deterministic comb.
    pub fn normalization(&self) -> f64 {
        (self.d0 * self.d.pow(self.slots as u32)) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comb {
    structure: CombStructure,
    choi: LabeledOperator,
}

impl Comb {
    /// Aligns `choi` to the canonical port order; rejects non-Hermitian input.
    pub fn new(structure: CombStructure, choi: LabeledOperator) -> Result<Self> {
        let choi = choi.aligned_to(&structure.registry())?;
        let r = choi.hermitian_residual();
        if r > 1e-8 * choi.frobenius_norm().max(1.0) {
            return Err(Error::NotHermitian(r));
        }
        Ok(Self { structure, choi })
    }

    pub fn from_matrix(structure: CombStructure, matrix: CMatrix) -> Result<Self> {
        Self::new(structure, LabeledOperator::new(structure.registry(), matrix)?)
    }

    pub fn zero(structure: CombStructure) -> Self {
        Self { structure, choi: LabeledOperator::zeros(structure.registry()) }
    }

    pub fn structure(&self) -> &CombStructure {
        &self.structure
    }

    pub fn choi(&self) -> &LabeledOperator {
        &self.choi
    }

    pub fn into_choi(self) -> LabeledOperator {
        self.choi
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { structure: self.structure, choi: self.choi.scaled(factor) }
    }

    pub fn add(&self, other: &Comb) -> Result<Self> {
        self.same_structure(other)?;
        Ok(Self { structure: self.structure, choi: self.choi.add(&other.choi)? })
    }

    fn same_structure(&self, other: &Comb) -> Result<()> {
        if self.structure != other.structure {
            return Err(Error::DimensionMismatch(format!(
                "comb structures differ: {:?} vs {:?}",
                self.structure, other.structure
            )));
        }
        Ok(())
    }
}

/// `I^{I0} ⊗ I^{I1}/d ⊗ I^{O1} ⊗ ... ⊗ I^{IK}/d ⊗ I^{OK} ⊗ I^{O0}/d0`
pub fn maximally_mixed_comb(structure: CombStructure) -> Comb {
    let n = structure.d.pow(structure.slots as u32);
    let scale = 1.0 / (n * structure.d0) as f64;
    let choi = LabeledOperator::identity(structure.registry()).scaled(scale);
    Comb { structure, choi }
}

/// Routes `I0 -> I1`, `O1 -> I2`, ..., `OK -> O0` through `J_id` wires.
pub fn identity_wiring_comb(slots: usize, d: usize) -> Result<Comb> {
    let structure = CombStructure::new(slots, d, d)?;
    let names = structure.labels();
    let wire = crate::channels::identity_channel(d).into_choi();
    let wires = names
        .chunks(2)
        .map(|pair| wire.relabeled(&[&pair[0], &pair[1]]))
        .collect::<Result<Vec<_>>>()?;
    Comb::new(structure, tensor_all(&wires)?)
}

/// `J_id^{I0 O0}` with `I/d` on every slot pair: ignores its inputs.
pub fn discard_and_identity_comb(slots: usize, d: usize, d0: usize) -> Result<Comb> {
    let structure = CombStructure::new(slots, d, d0)?;
    let wire = crate::channels::identity_channel(d0).into_choi().relabeled(&[OPEN_IN, OPEN_OUT])?;
    let mut choi = LabeledOperator::zeros(structure.registry());
    let rest = structure.registry().without(&[OPEN_IN, OPEN_OUT])?;
    let scale = 1.0 / d.pow(slots as u32) as f64;
    choi.add_embedded(&wire.tensor(&LabeledOperator::identity(rest))?, scale)?;
    Comb::new(structure, choi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub equation: String,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombReport {
    pub valid: bool,
    pub psd: bool,
    pub min_eigenvalue: f64,
    pub trace_residual: f64,
    pub causal: Vec<Residual>,
    /// First equation whose residual exceeds the tolerance, if any.
    pub failing: Option<String>,
}

impl CombReport {
    pub fn max_causal_residual(&self) -> f64 {
        self.causal.iter().map(|r| r.residual).fold(self.trace_residual, f64::max)
    }
}

/// Residuals of `Tr_{O0} C = C^(K) ⊗ I^{OK}/d`, `Tr_{Ik} C^(k) = C^(k-1) ⊗ I^{O(k-1)}/d`
/// and `Tr_{I1} C^(1) = Tr C · I^{I0}/d0`.
pub fn causal_residuals(choi: &LabeledOperator, structure: &CombStructure) -> Result<Vec<Residual>> {
    let d = structure.d as f64;
    let mut out = Vec::with_capacity(structure.slots + 1);
    let mut upper = choi.partial_trace(&[OPEN_OUT])?;
    let mut traced = OPEN_OUT.to_string();
    let mut prev = "C".to_string();
    for k in (1..=structure.slots).rev() {
        let ok = labels::output(k);
        let lower = upper.partial_trace(&[&ok])?;
        let rebuilt = lower.tensor(&LabeledOperator::identity(SpaceRegistry::new([(ok.clone(), structure.d)])?))?;
        out.push(Residual {
            equation: format!("Tr_{traced} {prev} = C^({k}) ⊗ I^{ok}/d"),
            residual: upper.distance(&rebuilt.scaled(1.0 / d))?,
        });
        let ik = labels::input(k);
        upper = lower.partial_trace(&[&ik])?;
        traced = ik;
        prev = format!("C^({k})");
    }
    let total = choi.trace();
    let expected = LabeledOperator::identity(upper.registry().clone()).scaled_complex(total * c(1.0 / structure.d0 as f64));
    out.push(Residual {
        equation: format!("Tr_{traced} C^(1) = Tr C · I^{OPEN_IN}/d0"),
        residual: upper.distance(&expected)?,
    });
    Ok(out)
}

pub fn validate_deterministic_comb(comb: &Comb, tol: f64) -> CombReport {
    let min_eig = min_eigenvalue(comb.choi()).unwrap_or(f64::NEG_INFINITY);
    let trace_residual = (comb.choi().trace() - c(comb.structure().normalization())).norm();
    let causal = causal_residuals(comb.choi(), comb.structure()).unwrap_or_else(|e| {
        vec![Residual { equation: format!("causal chain: {e}"), residual: f64::INFINITY }]
    });
    let psd = min_eig >= -tol;
    let failing = if !psd {
        Some("C >= 0".to_string())
    } else if trace_residual > tol {
        Some("Tr C = d0 d^K".to_string())
    } else {
        causal.iter().find(|r| !(r.residual <= tol)).map(|r| r.equation.clone())
    };
    CombReport { valid: failing.is_none(), psd, min_eigenvalue: min_eig, trace_residual, causal, failing }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub valid: bool,
    pub min_eigenvalue_s: f64,
    pub min_eigenvalue_n: f64,
    pub sum: CombReport,
}

/// `S >= 0`, `N >= 0` and `S + N` deterministic.
pub fn validate_probabilistic_pair(s: &Comb, n: &Comb, tol: f64) -> Result<PairReport> {
    s.same_structure(n)?;
    let min_s = min_eigenvalue(s.choi())?;
    let min_n = min_eigenvalue(n.choi())?;
    let sum = validate_deterministic_comb(&s.add(n)?, tol);
    Ok(PairReport {
        valid: min_s >= -tol && min_n >= -tol && sum.valid,
        min_eigenvalue_s: min_s,
        min_eigenvalue_n: min_n,
        sum,
    })
}

/// Choi of the induced `I0 -> O0` map, `Tr_{IO}[C (J_1 ⊗ ... ⊗ J_K)^T]`.
pub fn apply_comb(comb: &Comb, channels: &[Channel]) -> Result<Channel> {
    let st = comb.structure();
    if channels.len() != st.slots {
        return Err(Error::DimensionMismatch(format!(
            "comb has {} slots but {} channels were given",
            st.slots,
            channels.len()
        )));
    }
    let chois = channels
        .iter()
        .enumerate()
        .map(|(k, ch)| {
            if ch.d_in() != st.d || ch.d_out() != st.d {
                return Err(Error::DimensionMismatch(format!(
                    "slot {} expects a {}->{} channel, got {}->{}",
                    k + 1,
                    st.d,
                    st.d,
                    ch.d_in(),
                    ch.d_out()
                )));
            }
            ch.choi().relabeled(&[labels::input(k + 1), labels::output(k + 1)])
        })
        .collect::<Result<Vec<_>>>()?;
    let inputs = tensor_all(&chois)?.transpose();
    let out = comb.choi().contract(&inputs)?;
    Channel::from_choi(out, OPEN_IN, OPEN_OUT)
}

/// `apply_comb` with `J_U` in every slot.
pub fn apply_comb_to_unitary(comb: &Comb, u: &CMatrix) -> Result<Channel> {
    let ch = choi_of_unitary(u)?;
    apply_comb(comb, &vec![ch; comb.structure().slots])
}

/// `‖M - φ+ M φ+‖` and `q = <φ+|M|φ+>/d0` for an operator on `(I0, O0)`.
pub fn proportionality_to_identity(m: &CMatrix, d0: usize) -> (f64, f64) {
    let p = phi_plus(d0);
    let projected = &p * m * &p;
    let residual = (m - &projected).norm();
    let q = projected.trace().re / d0 as f64;
    (residual, q)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeutralizationReport {
    pub ok: bool,
    pub q: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Each output must satisfy `‖M - φ+ M φ+‖ <= tol · max(1, ‖M‖)`.
pub fn check_neutralization_direct(n: &Comb, unitaries: &[CMatrix], tol: f64) -> Result<NeutralizationReport> {
    let d0 = n.structure().d0;
    let per_u = unitaries
        .par_iter()
        .map(|u| {
            let out = apply_comb_to_unitary(n, u)?.into_choi();
            let (r, q) = proportionality_to_identity(out.matrix(), d0);
            Ok((r / out.frobenius_norm().max(1.0), q))
        })
        .collect::<Result<Vec<_>>>()?;
    let (residuals, q): (Vec<f64>, Vec<f64>) = per_u.into_iter().unzip();
    Ok(NeutralizationReport { ok: residuals.iter().all(|&r| r <= tol), q, residuals })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricReport {
    pub ok: bool,
    pub residual: f64,
    /// `Tr_{IO}(Π N Π) = q_sym · J_id`
    pub q: f64,
}

/// Sufficient condition `Tr_{IO}(Π N Π) ∝ J_id` on `(I0, O0)`.
pub fn check_neutralization_symmetric(n: &Comb, tol: f64) -> Result<SymmetricReport> {
    let st = n.structure();
    let sandwiched = symmetric_sandwich(n.choi(), st.slots)?;
    let reduced = sandwiched.partial_trace(&st.slot_labels())?.reorder(&[OPEN_IN, OPEN_OUT])?;
    let (r, q) = proportionality_to_identity(reduced.matrix(), st.d0);
    let residual = r / reduced.frobenius_norm().max(1.0);
    Ok(SymmetricReport { ok: residual <= tol, residual, q })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessReport {
    pub ok: bool,
    pub p: Vec<f64>,
    /// `‖M - p_U T‖ / ‖T‖` with `T` the target Choi operator.
    pub residuals: Vec<f64>,
}

impl SuccessReport {
    pub fn spread(&self) -> f64 {
        spread(&self.p)
    }
}

pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() {
        0.0
    } else {
        max - min
    }
}

/// Least-squares `p = Re<T, M> / ‖T‖²`; returns `(p, ‖M - pT‖ / ‖T‖)`.
pub fn fit_scalar(m: &CMatrix, target: &CMatrix) -> (f64, f64) {
    let tt = target.norm_squared();
    let p = target.dotc(m).re / tt;
    let r = (m - target * c(p)).norm() / tt.sqrt();
    (p, r)
}

pub fn check_success_action<F>(s: &Comb, target: F, unitaries: &[CMatrix], tol: f64) -> Result<SuccessReport>
where
    F: Fn(&CMatrix) -> Result<Channel> + Sync,
{
    let per_u = unitaries
        .par_iter()
        .map(|u| {
            let out = apply_comb_to_unitary(s, u)?;
            let t = target(u)?.with_labels(OPEN_IN, OPEN_OUT)?;
            let m = out.choi().aligned_to(t.choi().registry())?;
            Ok(fit_scalar(m.matrix(), t.choi().matrix()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (p, residuals): (Vec<f64>, Vec<f64>) = per_u.into_iter().unzip();
    Ok(SuccessReport { ok: residuals.iter().all(|&r| r <= tol), p, residuals })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthTwoReport {
    pub ok: bool,
    pub residual: f64,
}

/// `Tr_{O0} C = Tr_{O2...OK O0} C ⊗ I^{O2...OK}/d^{K-1}`: only the first
/// slot's output is used before `O0`.
pub fn check_depth_two(comb: &Comb, tol: f64) -> Result<DepthTwoReport> {
    let st = comb.structure();
    if st.slots < 2 {
        return Err(Error::InvalidArgument("depth-two condition needs K >= 2".into()));
    }
    let lhs = comb.choi().partial_trace(&[OPEN_OUT])?;
    let later: Vec<String> = (2..=st.slots).map(labels::output).collect();
    let reduced = lhs.partial_trace(&later)?;
    let ids = SpaceRegistry::new(later.iter().map(|l| (l.clone(), st.d)))?;
    let rhs = reduced.tensor(&LabeledOperator::identity(ids))?.scaled(1.0 / st.d.pow(st.slots as u32 - 1) as f64);
    let residual = lhs.distance(&rhs)?;
    Ok(DepthTwoReport { ok: residual <= tol, residual })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub unitary: MatrixData,
    pub p_u: f64,
    pub q_u: f64,
    pub residual_success: f64,
    pub residual_draw: f64,
}

/// Numerical evidence that `(S, N)` is a success-or-draw pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SodCertificate {
    pub epsilon: f64,
    pub samples: Vec<SampleRecord>,
    pub causal: Vec<Residual>,
    pub trace_residual: f64,
    pub min_eigenvalue_s: f64,
    pub min_eigenvalue_n: f64,
    pub neutralization_residual: f64,
    pub depth_two_residual: Option<f64>,
}

impl SodCertificate {
    /// Evaluates `(S, N)` on `unitaries` against `target`.
    pub fn evaluate<F>(epsilon: f64, s: &Comb, n: &Comb, target: F, unitaries: &[CMatrix]) -> Result<Self>
    where
        F: Fn(&CMatrix) -> Result<Channel> + Sync,
    {
        let pair = validate_probabilistic_pair(s, n, f64::INFINITY)?;
        let success = check_success_action(s, target, unitaries, f64::INFINITY)?;
        let draw = check_neutralization_direct(n, unitaries, f64::INFINITY)?;
        let symmetric = check_neutralization_symmetric(n, f64::INFINITY)?;
        let sum = s.add(n)?;
        let depth_two = if s.structure().slots >= 2 { Some(check_depth_two(&sum, f64::INFINITY)?.residual) } else { None };
        let samples = unitaries
            .iter()
            .enumerate()
            .map(|(i, u)| SampleRecord {
                unitary: MatrixData::from_matrix(u),
                p_u: success.p[i],
                q_u: draw.q[i],
                residual_success: success.residuals[i],
                residual_draw: draw.residuals[i],
            })
            .collect();
        Ok(Self {
            epsilon,
            samples,
            causal: pair.sum.causal,
            trace_residual: pair.sum.trace_residual,
            min_eigenvalue_s: pair.min_eigenvalue_s,
            min_eigenvalue_n: pair.min_eigenvalue_n,
            neutralization_residual: symmetric.residual,
            depth_two_residual: depth_two,
        })
    }

    pub fn max_causal_residual(&self) -> f64 {
        self.causal.iter().map(|r| r.residual).fold(self.trace_residual, f64::max)
    }

    /// All sampled `p_U, q_U >= -tol` and `p_U + q_U <= 1 + tol`.
    pub fn probabilities_consistent(&self, tol: f64) -> bool {
        self.samples.iter().all(|s| s.p_u >= -tol && s.q_u >= -tol && s.p_u + s.q_u <= 1.0 + tol)
    }
}
