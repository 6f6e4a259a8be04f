use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use sod_core::channels::{choi_of_unitary, phi_plus, span_dimension, SpanOptions};
use sod_core::combs::{Comb, CombStructure};
use sod_core::labels::{comb_labels, input, output, OPEN_IN, OPEN_OUT};
use sod_core::tensor::{symmetric_projector, tensor_all, CMatrix, LabeledOperator, SpaceRegistry};
use sod_core::{Error, Result};

use crate::problem::{hermitian_unit_basis, psd_kernel, Coefficient, Constraint, SdpProblem};
use crate::solver::{solve_sdp, SdpSolution, SolverOptions};

pub const S_BLOCK: usize = 0;
pub const N_BLOCK: usize = 1;

/// How the draw branch is forced to output a multiple of the identity channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeutralMode {
    /// `Tr_{IO}(Π N Π) ∝ J_id`, sufficient for every unitary at once.
    Symmetric,
    /// `Tr_{IO}[N (J_{U_i}^{⊗K})ᵀ] ∝ J_id` on a spanning set `{U_i}`.
    Spanning,
}

impl fmt::Display for NeutralMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NeutralMode::Symmetric => "symmetric",
            NeutralMode::Spanning => "spanning",
        })
    }
}

impl FromStr for NeutralMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "spanning" => Ok(Self::Spanning),
            other => Err(Error::InvalidArgument(format!("unknown neutral mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InversionProblem {
    pub problem: SdpProblem,
    pub structure: CombStructure,
    pub mode: NeutralMode,
    /// Unitaries whose `J_U^{⊗K}` span the same space as all unitaries.
    pub unitaries: Vec<CMatrix>,
}

fn constraint_both(label: String, h: &LabeledOperator, registry: &SpaceRegistry) -> Result<Constraint> {
    let h = Coefficient::from_operator(&h.aligned_to(registry)?);
    Ok(Constraint { label, terms: vec![(S_BLOCK, h.clone()), (N_BLOCK, h)], p_coeff: 0.0, rhs: 0.0 })
}

fn identity_on<S: AsRef<str>>(registry: &SpaceRegistry, labels: &[S]) -> Result<LabeledOperator> {
    Ok(LabeledOperator::identity(registry.select(labels)?))
}

/// `(A, B)` label sets, `A ⊂ B`, for the chain `Tr_A C = Tr_B C ⊗ I^{B∖A}/dim`.
fn causal_pairs(slots: usize) -> Vec<(Vec<String>, Vec<String>)> {
    let mut pairs = Vec::new();
    let mut a = vec![OPEN_OUT.to_string()];
    let mut b = vec![output(slots), OPEN_OUT.to_string()];
    pairs.push((a.clone(), b.clone()));
    for k in (2..=slots).rev() {
        a = b.clone();
        a.push(input(k));
        b = a.clone();
        b.push(output(k - 1));
        pairs.push((a.clone(), b.clone()));
    }
    a = b;
    a.push(input(1));
    b = a.clone();
    b.push(OPEN_IN.to_string());
    pairs.push((a, b));
    pairs
}

/// `Tr_{O0}`/`Tr_{Ik}` chain on `S + N` and `Tr(S + N) = d0 d^K`.
fn add_causal_constraints(prob: &mut SdpProblem, structure: &CombStructure) -> Result<()> {
    let full = structure.registry();
    for (a, b) in causal_pairs(structure.slots) {
        let kept = full.without(&a)?;
        let extra: Vec<&String> = b.iter().filter(|l| !a.contains(l)).collect();
        let extra_dim: usize = extra.iter().map(|l| full.dim_of(l)).product::<Result<usize>>()?;
        let id_a = identity_on(&full, &a)?;
        let id_b = identity_on(&full, &b)?;
        for (k, e) in hermitian_unit_basis(kept.total_dim()).into_iter().enumerate() {
            let e = LabeledOperator::new(kept.clone(), e)?;
            let lower = e.partial_trace(&extra)?.tensor(&id_b)?.scaled(1.0 / extra_dim as f64);
            let h = e.tensor(&id_a)?.aligned_to(&full)?.sub(&lower.aligned_to(&full)?)?;
            prob.add_constraint(constraint_both(format!("causal Tr_{} #{k}", a.join(",")), &h, &full)?);
        }
    }
    let id = LabeledOperator::identity(full.clone());
    let mut norm = constraint_both("normalization".into(), &id, &full)?;
    norm.rhs = structure.normalization();
    prob.add_constraint(norm);
    Ok(())
}

/// `(J_U^{⊗K})ᵀ` on `I1, O1, ..., IK, OK`.
fn transposed_power(u: &CMatrix, slots: usize) -> Result<LabeledOperator> {
    let j = choi_of_unitary(u)?.into_choi();
    let parts = (1..=slots).map(|k| j.relabeled(&[input(k), output(k)])).collect::<Result<Vec<_>>>()?;
    Ok(tensor_all(&parts)?.transpose())
}

fn open_basis(d0: usize) -> Result<Vec<LabeledOperator>> {
    let open = SpaceRegistry::new([(OPEN_IN, d0), (OPEN_OUT, d0)])?;
    hermitian_unit_basis(d0 * d0).into_iter().map(|e| LabeledOperator::new(open.clone(), e)).collect()
}

/// `E - φ+ E φ+`: the functional vanishes exactly on multiples of `φ+`.
fn off_identity(e: &LabeledOperator, d0: usize) -> LabeledOperator {
    let phi = phi_plus(d0);
    let m = e.matrix() - &phi * e.matrix() * &phi;
    LabeledOperator::new(e.registry().clone(), m).expect("same shape")
}

/// Eigenvalues below this fraction of the largest count as kernel when
/// computing faces.
const FACE_TOL: f64 = 1e-9;

/// `I - J/Tr J` on the open wires: the part of the output a branch must not produce.
fn open_complement(target: &LabeledOperator) -> Result<LabeledOperator> {
    let id = LabeledOperator::identity(target.registry().clone());
    id.sub(&target.scaled(1.0 / target.trace().re))
}

/// Every equality `Tr[(|v><v| ⊗ W) X] = 0` with `X ⪰ 0` forces `X` onto the
/// kernel of `Σ Q ⊗ W`; restricting the block to that face leaves the
/// feasible set unchanged and removes the degeneracy that stalls ADMM.
fn face_of(parts: &[(LabeledOperator, LabeledOperator)], full: &SpaceRegistry) -> Result<CMatrix> {
    let mut q = CMatrix::zeros(full.total_dim(), full.total_dim());
    for (open, slots) in parts {
        q += open.tensor(slots)?.aligned_to(full)?.matrix();
    }
    Ok(psd_kernel(&q, FACE_TOL))
}

pub fn build_inversion_problem(d: usize, slots: usize, mode: NeutralMode, seed: u64) -> Result<InversionProblem> {
    if d != 2 || !(1..=2).contains(&slots) {
        return Err(Error::InvalidArgument(format!("inversion SDP supports d = 2 and K in {{1, 2}}, got d = {d}, K = {slots}")));
    }
    let structure = CombStructure::new(slots, d, d)?;
    let full = structure.registry();
    let mut prob = SdpProblem::new(true);
    prob.add_block("S", full.total_dim());
    prob.add_block("N", full.total_dim());

    let span = span_dimension(d, slots, seed, &SpanOptions::default())?;
    let basis = open_basis(d)?;
    let wires = span.spanning_unitaries.iter().map(|u| transposed_power(u, slots)).collect::<Result<Vec<_>>>()?;
    let mut success_parts = Vec::new();
    for (i, (u, w)) in span.spanning_unitaries.iter().zip(&wires).enumerate() {
        let target = choi_of_unitary(&u.adjoint())?.into_choi();
        success_parts.push((open_complement(&target.relabeled(&[OPEN_IN, OPEN_OUT])?)?, w.clone()));
        for (k, e) in basis.iter().enumerate() {
            // Tr[E Tr_IO(S Wᵀ...)] = Tr[(E ⊗ W) S]
            let h = Coefficient::from_operator(&e.tensor(w)?.aligned_to(&full)?);
            let p_coeff = -(e.matrix() * target.matrix()).trace().re;
            prob.add_constraint(Constraint { label: format!("success U{i} #{k}"), terms: vec![(S_BLOCK, h)], p_coeff, rhs: 0.0 });
        }
    }

    let s_face = face_of(&success_parts, &full)?;
    prob.set_face(S_BLOCK, &s_face);

    let wire = LabeledOperator::on([(OPEN_IN, d), (OPEN_OUT, d)], phi_plus(d))?;
    let not_wire = open_complement(&wire)?;
    let draw_parts: Vec<(LabeledOperator, LabeledOperator)> = match mode {
        NeutralMode::Spanning => wires.iter().map(|w| (not_wire.clone(), w.clone())).collect(),
        NeutralMode::Symmetric => vec![(not_wire, symmetric_projector(slots, d)?)],
    };
    prob.set_face(N_BLOCK, &face_of(&draw_parts, &full)?);

    match mode {
        NeutralMode::Spanning => {
            for (i, w) in wires.iter().enumerate() {
                for (k, e) in basis.iter().enumerate() {
                    let h = Coefficient::from_operator(&off_identity(e, d).tensor(w)?.aligned_to(&full)?);
                    prob.add_constraint(Constraint { label: format!("draw U{i} #{k}"), terms: vec![(N_BLOCK, h)], p_coeff: 0.0, rhs: 0.0 });
                }
            }
        }
        NeutralMode::Symmetric => {
            let pi = symmetric_projector(slots, d)?;
            for (k, e) in basis.iter().enumerate() {
                let h = Coefficient::from_operator(&off_identity(e, d).tensor(&pi)?.aligned_to(&full)?);
                prob.add_constraint(Constraint { label: format!("draw sym #{k}"), terms: vec![(N_BLOCK, h)], p_coeff: 0.0, rhs: 0.0 });
            }
        }
    }
    add_causal_constraints(&mut prob, &structure)?;
    Ok(InversionProblem { problem: prob, structure, mode, unitaries: span.spanning_unitaries })
}

#[derive(Clone, Debug)]
pub struct InversionResult {
    pub mode: NeutralMode,
    pub p: f64,
    /// `p / (1/4)` relative to the teleportation protocol.
    pub implied_epsilon: f64,
    pub s: Comb,
    pub n: Comb,
    pub span_size: usize,
    pub solution: SdpSolution,
}

pub const TELEPORTATION_P: f64 = 0.25;

pub fn solve_inversion(d: usize, slots: usize, mode: NeutralMode, seed: u64, opts: &SolverOptions) -> Result<InversionResult> {
    let inv = build_inversion_problem(d, slots, mode, seed)?;
    let solution = solve_sdp(&inv.problem, opts)?;
    let labels = comb_labels(slots);
    let to_comb = |m: &CMatrix| -> Result<Comb> {
        let op = LabeledOperator::new(inv.structure.registry(), m.clone())?;
        debug_assert_eq!(op.registry().labels().collect::<Vec<_>>(), labels.iter().map(String::as_str).collect::<Vec<_>>());
        Comb::new(inv.structure, op.hermitian_part())
    };
    Ok(InversionResult {
        mode,
        p: solution.p,
        implied_epsilon: solution.p / TELEPORTATION_P,
        s: to_comb(&solution.blocks[S_BLOCK])?,
        n: to_comb(&solution.blocks[N_BLOCK])?,
        span_size: inv.unitaries.len(),
        solution,
    })
}

#[derive(Clone, Debug)]
pub struct InversionComparison {
    pub symmetric: InversionResult,
    pub spanning: InversionResult,
}

impl InversionComparison {
    pub fn gap(&self) -> f64 {
        (self.symmetric.p - self.spanning.p).abs()
    }

    /// The spanning formulation is the exact one; the symmetric one is a restriction.
    pub fn p(&self) -> f64 {
        self.spanning.p
    }
}

/// Solves the inversion SDP in both neutralization modes.
pub fn optimal_inversion_probability(d: usize, slots: usize, seed: u64, opts: &SolverOptions) -> Result<InversionComparison> {
    Ok(InversionComparison {
        symmetric: solve_inversion(d, slots, NeutralMode::Symmetric, seed, opts)?,
        spanning: solve_inversion(d, slots, NeutralMode::Spanning, seed, opts)?,
    })
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::*;

    #[test]
    fn block_sizes() {
        for (k, dim) in [(1, 16), (2, 64)] {
            let p = build_inversion_problem(2, k, NeutralMode::Symmetric, 0).unwrap();
            assert!(p.problem.blocks.iter().all(|b| b.dim == dim));
            assert!(p.problem.validate().is_ok());
        }
    }

    #[test]
    fn spanning_set_matches_span_dimension() {
        for seed in [0, 1, 2] {
            assert_eq!(build_inversion_problem(2, 2, NeutralMode::Spanning, seed).unwrap().unitaries.len(), 35);
        }
        assert_eq!(build_inversion_problem(2, 1, NeutralMode::Spanning, 0).unwrap().unitaries.len(), 10);
    }

    #[test]
    fn unsupported_sizes_rejected() {
        assert!(build_inversion_problem(3, 1, NeutralMode::Symmetric, 0).is_err());
        assert!(build_inversion_problem(2, 3, NeutralMode::Symmetric, 0).is_err());
    }

    #[test]
    fn causal_pairs_cover_chain() {
        let pairs = causal_pairs(2);
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[0], (vec!["O0".to_string()], vec!["O2".to_string(), "O0".to_string()]));
        assert_eq!(pairs[2].1.len(), 6);
    }

    #[test]
    fn causal_constraints_accept_valid_combs() {
        use sod_core::combs::{discard_and_identity_comb, identity_wiring_comb};
        for (slots, comb) in [(1, identity_wiring_comb(1, 2).unwrap()), (2, discard_and_identity_comb(2, 2, 2).unwrap())] {
            let st = CombStructure::new(slots, 2, 2).unwrap();
            let mut prob = SdpProblem::new(false);
            prob.add_block("S", st.total_dim());
            prob.add_block("N", st.total_dim());
            add_causal_constraints(&mut prob, &st).unwrap();
            let half = comb.choi().aligned_to(&st.registry()).unwrap().matrix() * Complex64::new(0.5, 0.0);
            assert!(prob.max_violation(&[half.clone(), half], 0.0) < 1e-12);
            // breaking normalization is detected
            let bad = comb.choi().matrix() * Complex64::new(0.7, 0.0);
            assert!(prob.max_violation(&[bad.clone(), bad], 0.0) > 1e-3);
        }
    }

    #[test]
    fn neutral_mode_parses() {
        assert_eq!("spanning".parse::<NeutralMode>().unwrap(), NeutralMode::Spanning);
        assert!("other".parse::<NeutralMode>().is_err());
        assert_eq!(NeutralMode::Symmetric.to_string(), "symmetric");
    }
}
