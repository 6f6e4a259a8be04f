//! One PASS/FAIL line per acceptance criterion, each at its stated
//! tolerance and time budget. Exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use num_complex::Complex64;

use sod_core::channels::{span_dimension, twirl_Q, HaarSampler, SpanOptions, TargetMap};
use sod_core::combs::{check_neutralization_direct, check_success_action, spread};
use sod_core::construction::{build_ico_neutral, build_success_or_draw, lift_neutral, SodOptions};
use sod_core::protocols::{bernoulli_attempt, repeat_until_success, teleport_inversion_round, teleportation_sstgs, Outcome};
use sod_core::tensor::{eigh, symmetric_projector, CMatrix, LabeledOperator, SpaceRegistry};
use sod_sdp::{solve_inversion, InversionComparison, NeutralMode, SolverOptions, TELEPORTATION_P};

struct Line {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn span_dim() -> Line {
    let opts = SpanOptions::default();
    let (a, ta) = timed(|| span_dimension(2, 1, 0, &opts).unwrap().dim);
    let (b, tb) = timed(|| span_dimension(3, 1, 0, &opts).unwrap().dim);
    let limit = Duration::from_secs(5);
    Line {
        id: 1,
        title: "span dimension (2,1) = 10 and (3,1) = 65",
        pass: a == 10 && b == 65 && ta < limit && tb < limit,
        detail: format!("dims {a}, {b}; {:.2?}, {:.2?}", ta, tb),
    }
}

fn twirl() -> Line {
    let (t, time) = timed(|| twirl_Q(2, 2000, 0).unwrap());
    let (values, _) = eigh(t.exact.matrix()).unwrap();
    let rank = values.iter().filter(|&&v| v > 1e-9).count();
    Line {
        id: 2,
        title: "twirl estimate within 0.05 at 2000 samples, rank(Q) = 10",
        pass: t.deviation <= 0.05 && rank == 10 && time < Duration::from_secs(10),
        detail: format!("‖Q̂ - Q‖_F = {:.4}, rank {rank}, {:.2?}", t.deviation, time),
    }
}

fn inversion_two_slots(cmp: &InversionComparison, times: (Duration, Duration)) -> Line {
    let third = 1.0 / 3.0;
    let ok = |p: f64| (p - third).abs() <= 1e-3;
    let limit = Duration::from_secs(600);
    Line {
        id: 3,
        title: "inversion SDP (2,2): p = 1/3 ± 1e-3 in both modes",
        pass: ok(cmp.symmetric.p) && ok(cmp.spanning.p) && times.0 <= limit && times.1 <= limit,
        detail: format!(
            "symmetric {:.8} ({:.2?}), spanning {:.8} ({:.2?})",
            cmp.symmetric.p, times.0, cmp.spanning.p, times.1
        ),
    }
}

fn inversion_one_slot() -> Line {
    let opts = SolverOptions::default();
    let (sym, ts) = timed(|| solve_inversion(2, 1, NeutralMode::Symmetric, 0, &opts).unwrap().p);
    let (span, tp) = timed(|| solve_inversion(2, 1, NeutralMode::Spanning, 0, &opts).unwrap().p);
    let limit = Duration::from_secs(120);
    Line {
        id: 4,
        title: "inversion SDP (2,1): p ≤ 1e-4",
        pass: sym <= 1e-4 && span <= 1e-4 && ts <= limit && tp <= limit,
        detail: format!("symmetric {sym:.2e} ({ts:.2?}), spanning {span:.2e} ({tp:.2?})"),
    }
}

fn implied_epsilon(cmp: &InversionComparison) -> Line {
    let eps = cmp.p() / TELEPORTATION_P;
    Line {
        id: 5,
        title: "implied ε at (2,2) = 4/3 ± 4e-3",
        pass: (eps - 4.0 / 3.0).abs() <= 4e-3,
        detail: format!("ε = {eps:.8}"),
    }
}

fn construction_end_to_end() -> Line {
    let (r, time) = timed(|| build_success_or_draw(&teleportation_sstgs(), 2, &SodOptions::default()).unwrap());
    let c = &r.certificate;
    let eps = r.epsilon;
    let causal = c.max_causal_residual();
    let min_eig = c.min_eigenvalue_s.min(c.min_eigenvalue_n);
    let success = c.samples.iter().map(|s| s.residual_success.max((s.p_u - eps * 0.25).abs() / (eps * 0.25))).fold(0.0, f64::max);
    let draw = c.samples.iter().map(|s| s.residual_draw.max((s.q_u - (1.0 - eps * 0.25)).abs())).fold(0.0, f64::max);
    let depth = c.depth_two_residual.unwrap_or(f64::INFINITY);
    Line {
        id: 6,
        title: "construction at d = 2 from teleportation: certified pair",
        pass: eps > 0.0
            && c.samples.len() == 100
            && causal <= 1e-8
            && min_eig >= -1e-9
            && success <= 1e-7
            && draw <= 1e-7
            && depth <= 1e-8
            && time < Duration::from_secs(60),
        detail: format!(
            "ε* = {eps}, causal {causal:.1e}, min eig {min_eig:.1e}, success {success:.1e}, draw {draw:.1e}, depth-two {depth:.1e}, {time:.2?}"
        ),
    }
}

/// Hermitian `M'` whose `Π`-block is already of the neutral form `I^A/d0 ⊗ X`.
fn admissible_perturbation(proj: &LabeledOperator) -> LabeledOperator {
    let a = SpaceRegistry::new([("A", 2)]).unwrap();
    let reg = a.concat(proj.registry()).unwrap();
    let mut s = HaarSampler::new(21);
    let n = reg.total_dim();
    let g = s.sample(n) + s.sample(n) * Complex64::i();
    let h = LabeledOperator::new(reg, (&g + g.adjoint()) * Complex64::new(0.5, 0.0)).unwrap();
    let pp = LabeledOperator::identity(a.clone()).tensor(proj).unwrap();
    let sandwich = pp.mul(&h).unwrap().mul(&pp).unwrap();
    let neutral = LabeledOperator::identity(a).scaled(0.5).tensor(&sandwich.partial_trace(&["A"]).unwrap()).unwrap();
    h.sub(&sandwich).unwrap().add(&neutral).unwrap()
}

fn lift() -> Line {
    let proj = symmetric_projector(2, 2).unwrap().relabeled(&["B1", "B2", "B3", "B4"]).unwrap();
    let m1 = admissible_perturbation(&proj);
    let id = LabeledOperator::identity(m1.registry().clone());
    let (mut tc, mut sup, mut neu) = (0.0f64, 0.0f64, 0.0f64);
    for eps in [0.0, 0.01, 0.05, 0.1, 0.2] {
        let l = lift_neutral(&id.add(&m1.scaled(eps)).unwrap(), &proj, "C").unwrap();
        tc = tc.max(l.trace_c_residual);
        sup = sup.max(l.support_residual);
        neu = neu.max(l.neutralization_residual);
    }
    Line {
        id: 7,
        title: "lift of I + εM' at 5 values of ε",
        pass: tc <= 1e-10 && sup <= 1e-10 && neu <= 1e-9,
        detail: format!("Tr_C {tc:.1e}, support {sup:.1e}, neutralization {neu:.1e}"),
    }
}

fn ico() -> Line {
    let r = build_success_or_draw(&teleportation_sstgs(), 2, &SodOptions { samples: 0, ..Default::default() }).unwrap();
    let rep = build_ico_neutral(&r.partial.operator, 2).unwrap().report().unwrap();
    Line {
        id: 8,
        title: "indefinite-causal-order variant of N",
        pass: rep.min_eigenvalue >= -1e-9 && rep.neutralization_residual <= 1e-9 && rep.marginal_residual <= 1e-9,
        detail: format!(
            "min eig {:.1e}, ΠNΠ residual {:.1e}, marginal residual {:.1e}",
            rep.min_eigenvalue, rep.neutralization_residual, rep.marginal_residual
        ),
    }
}

fn protocol() -> Line {
    let trials = 100_000u64;
    let mut successes = 0u64;
    let mut worst = 0.0f64;
    for t in 0..trials {
        let mut s = HaarSampler::new(0x5EED_0000 + t);
        let (u, psi) = (s.sample(2), s.state(2));
        let r = teleport_inversion_round(&u, &psi, t).unwrap();
        if r.outcome == Outcome::Success {
            successes += 1;
        }
        worst = worst.max((1.0 - r.fidelity).abs());
    }
    let freq = successes as f64 / trials as f64;
    let p = 1.0 / 3.0;
    let tail = repeat_until_success(|rng| Ok(bernoulli_attempt(p, rng)), p, 10, trials as usize, 99).unwrap();
    let expect = (2.0f64 / 3.0).powi(10);
    let sigma = (expect * (1.0 - expect) / trials as f64).sqrt();
    let dev = (tail.failure_fraction - expect).abs();
    Line {
        id: 9,
        title: "teleportation Monte Carlo and repeat-until-success tail",
        pass: (freq - 0.25).abs() <= 0.004 && worst <= 1e-12 && dev <= 3.0 * sigma,
        detail: format!("frequency {freq:.5}, worst fidelity defect {worst:.1e}, tail {:.5} vs {expect:.5} ({:.2}σ)", tail.failure_fraction, dev / sigma),
    }
}

fn out_of_sample(cmp: &InversionComparison) -> Line {
    let mut s = HaarSampler::new(0xFACE);
    let us: Vec<CMatrix> = (0..100).map(|_| s.sample(2)).collect();
    let mut pass = true;
    let mut detail = Vec::new();
    for r in [&cmp.symmetric, &cmp.spanning] {
        let draw = check_neutralization_direct(&r.n, &us, 1e-5).unwrap();
        let success = check_success_action(&r.s, |u| TargetMap::Inverse.choi(u), &us, f64::INFINITY).unwrap();
        let worst = draw.residuals.iter().copied().fold(0.0, f64::max);
        let sp = spread(&success.p);
        pass &= draw.ok && sp <= 1e-4;
        detail.push(format!("{}: neutralization {worst:.1e}, p_U spread {sp:.1e}", r.mode));
    }
    Line { id: 10, title: "SDP optimum on 100 fresh Haar unitaries", pass, detail: detail.join("; ") }
}

fn main() {
    let opts = SolverOptions::default();
    let (symmetric, ts) = timed(|| solve_inversion(2, 2, NeutralMode::Symmetric, 0, &opts).unwrap());
    let (spanning, tp) = timed(|| solve_inversion(2, 2, NeutralMode::Spanning, 0, &opts).unwrap());
    let cmp = InversionComparison { symmetric, spanning };
    let times = (ts, tp);

    let lines = vec![
        span_dim(),
        twirl(),
        inversion_two_slots(&cmp, times),
        inversion_one_slot(),
        implied_epsilon(&cmp),
        construction_end_to_end(),
        lift(),
        ico(),
        protocol(),
        out_of_sample(&cmp),
    ];
    let mut failed = 0;
    for l in &lines {
        println!("criterion {:>2} {} :: {} ({})", l.id, if l.pass { "PASS" } else { "FAIL" }, l.title, l.detail);
        failed += usize::from(!l.pass);
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
