use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sod_core::channels::{choi_of_unitary, HaarSampler, TargetMap};
use sod_core::combs::{
    apply_comb_to_unitary, check_depth_two, check_neutralization_direct, check_neutralization_symmetric,
    check_success_action, validate_probabilistic_pair,
};
use sod_core::construction::{
    antisym_coefficients, build_ico_neutral, build_neutral_partial, build_success_or_draw, build_success_part,
    choose_epsilon, decompose_one_slot, failure_partial, lift_neutral, neutral_partial_lines, OneSlotComb, SodOptions,
    SuccessOrDraw, DEFAULT_MARGIN, EPSILON_RESOLUTION,
};
use sod_core::labels::{input, output, OPEN_IN, OPEN_OUT};
use sod_core::protocols::teleportation_sstgs;
use sod_core::tensor::{min_eigenvalue, symmetric_projector, CMatrix, LabeledOperator, SpaceRegistry};

/// Bisection result for the teleportation comb at d = 2, margin 1e-10.
const TELEPORT_EPSILON: f64 = 0.2059326171875;

fn haar(n: usize, d: usize, seed: u64) -> Vec<CMatrix> {
    let mut s = HaarSampler::new(seed);
    (0..n).map(|_| s.sample(d)).collect()
}

fn teleport_pair() -> &'static SuccessOrDraw {
    static PAIR: OnceLock<SuccessOrDraw> = OnceLock::new();
    PAIR.get_or_init(|| build_success_or_draw(&teleportation_sstgs(), 2, &SodOptions::default()).unwrap())
}

#[test]
fn success_part_zero_epsilon_is_zero() {
    let s = build_success_part(&teleportation_sstgs(), 0.0, 2).unwrap();
    assert_eq!(s.choi().frobenius_norm(), 0.0);
}

#[test]
fn success_part_scales_teleportation_action() {
    let s = build_success_part(&teleportation_sstgs(), 0.1, 2).unwrap();
    assert!(min_eigenvalue(s.choi()).unwrap() > -1e-12);
    for u in haar(20, 2, 4) {
        let out = apply_comb_to_unitary(&s, &u).unwrap();
        let expect = choi_of_unitary(&u.adjoint()).unwrap().into_choi().scaled(0.025);
        assert!((out.choi().matrix() - expect.matrix()).norm() < 1e-10);
    }
}

#[test]
fn success_part_identity_wiring_reproduces_unitary() {
    let s = build_success_part(&OneSlotComb::identity_wiring(2).unwrap(), 1.0, 2).unwrap();
    for u in haar(10, 2, 8) {
        let out = apply_comb_to_unitary(&s, &u).unwrap();
        let expect = choi_of_unitary(&u).unwrap();
        assert!((out.choi().matrix() - expect.choi().matrix()).norm() < 1e-10);
    }
}

#[test]
fn teleportation_has_no_gamma() {
    let dec = decompose_one_slot(&teleportation_sstgs()).unwrap();
    assert!(dec.max_gamma <= 1e-10);
    assert!(!dec.gamma_flagged);
    assert!(dec.reconstruction_residual <= 1e-10);
}

#[test]
fn teleportation_partial_satisfies_modified_chain() {
    let dec = decompose_one_slot(&teleportation_sstgs()).unwrap();
    let coeffs = antisym_coefficients(2).unwrap();
    let p = build_neutral_partial(&dec, &coeffs, TELEPORT_EPSILON).unwrap();
    assert_eq!(p.causal.len(), 3);
    assert!(p.max_causal_residual() <= 1e-9, "{:?}", p.causal);
    assert!(p.symmetric_residual <= 1e-9);
    assert!(p.cj_residuals.iter().all(|r| *r <= 1e-9));
    assert!(min_eigenvalue(&p.operator).unwrap() >= -1e-12);
}

#[test]
fn partial_lines_reconstruct_failure_operator() {
    let dec = decompose_one_slot(&teleportation_sstgs()).unwrap();
    let coeffs = antisym_coefficients(2).unwrap();
    let eps = 0.3;
    let lines = neutral_partial_lines(&dec, &coeffs, eps).unwrap();
    let f = failure_partial(dec.reduced(), dec.d0, dec.d, eps).unwrap();
    let mut acc = LabeledOperator::zeros(f.registry().clone());
    for (name, op) in &lines {
        if !name.starts_with("alpha slot 2") && !name.starts_with("cascade") {
            acc = acc.add(op).unwrap();
        }
    }
    assert!(acc.distance(&f).unwrap() <= 1e-10);
}

#[test]
fn choose_epsilon_regression() {
    let eps = choose_epsilon(&teleportation_sstgs(), 2, DEFAULT_MARGIN).unwrap();
    assert!(eps > 0.0 && eps <= 1.0);
    assert!((eps - TELEPORT_EPSILON).abs() < 1e-12, "ε* = {eps}");
}

#[test]
fn choose_epsilon_zero_comb_hits_cap() {
    let t = teleportation_sstgs();
    let zero = LabeledOperator::zeros(t.choi.registry().clone());
    let s = OneSlotComb::new(zero, TargetMap::Inverse, 0.0).unwrap();
    assert_eq!(choose_epsilon(&s, 2, DEFAULT_MARGIN).unwrap(), 1.0);
}

#[test]
fn feasibility_is_monotone() {
    let s = teleportation_sstgs();
    let dec = decompose_one_slot(&s).unwrap();
    let coeffs = antisym_coefficients(2).unwrap();
    let proj = symmetric_projector(2, 2).unwrap();
    for t in [0.05, 0.25, 0.5, 0.75, 1.0] {
        let eps = t * TELEPORT_EPSILON;
        let p = build_neutral_partial(&dec, &coeffs, eps).unwrap();
        assert!(min_eigenvalue(&p.operator).unwrap() >= DEFAULT_MARGIN, "ε = {eps}");
        let lift = lift_neutral(&p.operator.scaled(4.0), &proj, OPEN_OUT).unwrap();
        assert!(lift.min_eigenvalue_on_support / 4.0 >= DEFAULT_MARGIN, "ε = {eps}");
    }
    // one grid step above ε* is infeasible
    let p = build_neutral_partial(&dec, &coeffs, TELEPORT_EPSILON + EPSILON_RESOLUTION).unwrap();
    let lift = lift_neutral(&p.operator.scaled(4.0), &proj, OPEN_OUT).unwrap();
    let margin = min_eigenvalue(&p.operator).unwrap().min(lift.min_eigenvalue_on_support / 4.0);
    assert!(margin < DEFAULT_MARGIN);
}

#[test]
fn pipeline_certificate_for_teleportation() {
    let r = teleport_pair();
    let c = &r.certificate;
    assert_eq!(r.epsilon, TELEPORT_EPSILON);
    assert_eq!(c.samples.len(), 100);
    assert!(c.max_causal_residual() <= 1e-8, "{:?}", c.causal);
    assert!(c.min_eigenvalue_s >= -1e-9 && c.min_eigenvalue_n >= -1e-9);
    assert!(c.neutralization_residual <= 1e-8);
    assert!(c.depth_two_residual.unwrap() <= 1e-8);
    let p = r.epsilon / 4.0;
    for s in &c.samples {
        assert!((s.p_u - p).abs() <= 1e-10);
        assert!((s.q_u - (1.0 - p)).abs() <= 1e-10);
        assert!(s.residual_success <= 1e-7 && s.residual_draw <= 1e-7);
    }
    assert!(c.probabilities_consistent(1e-10));
}

#[test]
fn pipeline_pair_passes_independent_checks() {
    let r = teleport_pair();
    let pair = validate_probabilistic_pair(&r.s, &r.n, 1e-8).unwrap();
    assert!(pair.valid, "{pair:?}");
    assert!(check_neutralization_symmetric(&r.n, 1e-8).unwrap().ok);
    let us = haar(50, 2, 1234);
    let draw = check_neutralization_direct(&r.n, &us, 1e-8).unwrap();
    assert!(draw.ok);
    let success = check_success_action(&r.s, |u| TargetMap::Inverse.choi(u), &us, 1e-8).unwrap();
    assert!(success.ok && success.spread() <= 1e-8);
    assert!(check_depth_two(&r.s.add(&r.n).unwrap(), 1e-8).unwrap().ok);
}

#[test]
fn lift_on_pipeline_input() {
    let r = teleport_pair();
    assert!(r.lift.trace_c_residual <= 1e-10);
    assert!(r.lift.support_residual <= 1e-10);
    assert!(r.lift.neutralization_residual <= 1e-9);
    // N keeps the partial as its O0 marginal
    let marginal = r.n.choi().partial_trace(&[OPEN_OUT]).unwrap();
    assert!(marginal.distance(&r.partial.operator).unwrap() <= 1e-10);
}

fn random_hermitian(reg: &SpaceRegistry, seed: u64) -> LabeledOperator {
    let n = reg.total_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    LabeledOperator::new(reg.clone(), (&g + g.adjoint()) * Complex64::new(0.5, 0.0)).unwrap()
}

/// `M'` with `Π M' Π` replaced by `I^A/d0 ⊗ Tr_A(Π M' Π)`.
fn admissible_perturbation(proj: &LabeledOperator, seed: u64) -> LabeledOperator {
    let a = SpaceRegistry::new([("A", 2)]).unwrap();
    let reg = a.concat(proj.registry()).unwrap();
    let h = random_hermitian(&reg, seed);
    let pp = LabeledOperator::identity(a.clone()).tensor(proj).unwrap();
    let sandwich = pp.mul(&h).unwrap().mul(&pp).unwrap();
    let neutral = LabeledOperator::identity(a).scaled(0.5).tensor(&sandwich.partial_trace(&["A"]).unwrap()).unwrap();
    h.sub(&sandwich).unwrap().add(&neutral).unwrap()
}

#[test]
fn lift_family_bounds_and_residuals() {
    let proj = symmetric_projector(2, 2).unwrap().relabeled(&["B1", "B2", "B3", "B4"]).unwrap();
    let m1 = admissible_perturbation(&proj, 21);
    let id = LabeledOperator::identity(m1.registry().clone());
    let m2 = lift_neutral(&m1, &proj, "C").unwrap().m_abc;
    let norm2 = m2.frobenius_norm();
    for eps in [0.0, 0.01, 0.05, 0.1, 0.2] {
        let m_ab = id.add(&m1.scaled(eps)).unwrap();
        let lift = lift_neutral(&m_ab, &proj, "C").unwrap();
        assert!(lift.trace_c_residual <= 1e-10);
        assert!(lift.support_residual <= 1e-10);
        assert!(lift.neutralization_residual <= 1e-9);
        assert!(lift.min_eigenvalue_on_support >= 0.5 - eps * norm2 - 1e-10, "ε = {eps}");
    }
}

#[test]
fn lift_is_linear() {
    let proj = symmetric_projector(2, 2).unwrap().relabeled(&["B1", "B2", "B3", "B4"]).unwrap();
    let m1 = admissible_perturbation(&proj, 3);
    let m2 = admissible_perturbation(&proj, 4);
    let l1 = lift_neutral(&m1, &proj, "C").unwrap().m_abc;
    let l2 = lift_neutral(&m2, &proj, "C").unwrap().m_abc;
    let l12 = lift_neutral(&m1.add(&m2).unwrap(), &proj, "C").unwrap().m_abc;
    assert!(l12.distance(&l1.add(&l2).unwrap()).unwrap() <= 1e-10);
}

#[test]
fn ico_variant_for_teleportation() {
    let r = teleport_pair();
    let ico = build_ico_neutral(&r.partial.operator, 2).unwrap();
    let rep = ico.report().unwrap();
    assert!(rep.eta_residual <= 1e-12);
    assert!(rep.min_eigenvalue_symmetric_part >= -1e-9);
    assert!(rep.min_eigenvalue_complement_part >= -1e-9);
    assert!(rep.split_residual <= 1e-9, "{rep:?}");
    assert!(rep.neutralization_residual <= 1e-9);
    assert!(rep.marginal_residual <= 1e-9);
    assert!(rep.block_residual <= 1e-10);
    assert!(rep.min_eigenvalue >= -1e-9);
    assert!((ico.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
}

#[test]
fn qutrit_partial_passes_chain_and_cj_checks() {
    let s = OneSlotComb::identity_wiring(3).unwrap();
    let dec = decompose_one_slot(&s).unwrap();
    assert!(!dec.gamma_flagged);
    let coeffs = antisym_coefficients(3).unwrap();
    let p = build_neutral_partial(&dec, &coeffs, 0.05).unwrap();
    assert_eq!(p.operator.registry().total_dim(), 3usize.pow(7));
    assert_eq!(p.causal.len(), 4);
    assert!(p.max_causal_residual() <= 1e-9, "{:?}", p.causal);
    assert!(p.symmetric_residual <= 1e-9);
    assert_eq!(p.cj_residuals.len(), 8);
    assert!(p.cj_residuals.iter().all(|r| *r <= 1e-9), "{:?}", p.cj_residuals);
    let labels: Vec<String> = p.operator.registry().labels().map(String::from).collect();
    assert_eq!(labels, [OPEN_IN.to_string(), input(1), output(1), input(2), output(2), input(3), output(3)]);
}
