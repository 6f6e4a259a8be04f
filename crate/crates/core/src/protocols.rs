//! State-vector simulation of teleportation-based unitary inversion and
//! repeat-until-success statistics.
//!
//! Qubits `a, b, c` (a most significant). `|ψ>` enters on `a` and is hit by
//! `Y`; `(b, c)` hold `|Φ+>`; `U` acts on `b`; `(a, b)` is measured in the
//! Bell basis `(I ⊗ X^i Z^j)|Φ+>`. After a fixed `Y` on `c`, the output is
//! `U† X^i Z^j |ψ>` up to phase, so `(0, 0)` inverts `U` and every other
//! outcome is undone by one more call of `U` and the Pauli correction.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{choi_of_unitary, unitarity_residual};
use crate::construction::OneSlotComb;
use crate::error::{Error, Result};
use crate::labels::{input, output, OPEN_IN, OPEN_OUT};
use crate::tensor::{c, CMatrix, LabeledOperator, SpaceRegistry, ONE, ZERO};

pub type State = DVector<Complex64>;

fn pauli_x() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

fn pauli_y() -> CMatrix {
    let i = Complex64::i();
    CMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Bell outcome `(i, j)`, labeling `σ = X^i Z^j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PauliFrame {
    pub i: u8,
    pub j: u8,
}

impl PauliFrame {
    pub const ALL: [PauliFrame; 4] =
        [PauliFrame { i: 0, j: 0 }, PauliFrame { i: 0, j: 1 }, PauliFrame { i: 1, j: 0 }, PauliFrame { i: 1, j: 1 }];

    pub fn is_success(&self) -> bool {
        self.i == 0 && self.j == 0
    }

    pub fn index(&self) -> usize {
        2 * self.i as usize + self.j as usize
    }

    /// `X^i Z^j`
    pub fn operator(&self) -> CMatrix {
        let mut m = CMatrix::identity(2, 2);
        if self.i == 1 {
            m = pauli_x() * m;
        }
        if self.j == 1 {
            m *= pauli_z();
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Draw,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundResult {
    pub outcome: Outcome,
    pub frame: PauliFrame,
    pub state: State,
    pub calls_used: usize,
    /// `|<target|state>|²` with target `U†|ψ>` on success and `|ψ>` on draw.
    pub fidelity: f64,
}

/// Applies a one-qubit gate to qubit `q` (0 = a) of a 3-qubit state.
fn apply_1q(state: &mut State, gate: &CMatrix, q: usize) {
    let shift = 2 - q;
    let bit = 1 << shift;
    for base in 0..8 {
        if base & bit != 0 {
            continue;
        }
        let (i0, i1) = (base, base | bit);
        let (v0, v1) = (state[i0], state[i1]);
        state[i0] = gate[(0, 0)] * v0 + gate[(0, 1)] * v1;
        state[i1] = gate[(1, 0)] * v0 + gate[(1, 1)] * v1;
    }
}

/// `<B_σ|_{ab} ⊗ I_c` applied to the state: unnormalized state of `c`.
fn bell_project(state: &State, frame: PauliFrame) -> State {
    // |B_σ> = (I ⊗ σ)|Φ+> = Σ_x |x> ⊗ σ|x> / √2
    let sigma = frame.operator();
    let mut out = State::zeros(2);
    let norm = c(std::f64::consts::FRAC_1_SQRT_2);
    for x in 0..2 {
        for y in 0..2 {
            let amp = sigma[(y, x)].conj() * norm;
            if amp == ZERO {
                continue;
            }
            for z in 0..2 {
                out[z] += amp * state[(x << 2) | (y << 1) | z];
            }
        }
    }
    out
}

fn check_round_inputs(u: &CMatrix, psi: &State) -> Result<()> {
    if u.nrows() != 2 || u.ncols() != 2 || psi.len() != 2 {
        return Err(Error::DimensionMismatch("teleportation inversion is defined for qubits".into()));
    }
    let r = unitarity_residual(u);
    if r > 1e-10 {
        return Err(Error::NotUnitary(r));
    }
    Ok(())
}

fn fidelity(a: &State, b: &State) -> f64 {
    a.dotc(b).norm_sqr()
}

/// One round driven by an external RNG.
pub fn teleport_round_with<R: Rng>(u: &CMatrix, psi: &State, rng: &mut R) -> Result<RoundResult> {
    check_round_inputs(u, psi)?;
    let psi = psi / Complex64::new(psi.norm(), 0.0);
    let mut state = State::zeros(8);
    let h = c(std::f64::consts::FRAC_1_SQRT_2);
    for x in 0..2 {
        state[x << 2] += psi[x] * h; // b c = 00
        state[(x << 2) | 0b11] += psi[x] * h; // b c = 11
    }
    apply_1q(&mut state, &pauli_y(), 0);
    apply_1q(&mut state, u, 1);

    let branches: Vec<State> = PauliFrame::ALL.iter().map(|f| bell_project(&state, *f)).collect();
    let probs: Vec<f64> = branches.iter().map(|b| b.norm_squared()).collect();
    let draw: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut pick = 3;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            pick = k;
            break;
        }
    }
    let frame = PauliFrame::ALL[pick];
    let mut out = &branches[pick] / Complex64::new(probs[pick].sqrt(), 0.0);
    out = pauli_y() * out;

    if frame.is_success() {
        let target = u.adjoint() * &psi;
        let f = fidelity(&target, &out);
        return Ok(RoundResult { outcome: Outcome::Success, frame, state: out, calls_used: 1, fidelity: f });
    }
    // out = U† σ |ψ>: one more call gives σ|ψ>, then undo σ
    let recovered = frame.operator().adjoint() * (u * out);
    let f = fidelity(&psi, &recovered);
    Ok(RoundResult { outcome: Outcome::Draw, frame, state: recovered, calls_used: 2, fidelity: f })
}

pub fn teleport_inversion_round(u: &CMatrix, psi: &State, seed: u64) -> Result<RoundResult> {
    teleport_round_with(u, psi, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Independent per-trial RNG: the root seed with the trial index as stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Outcome of one attempt inside a repeat-until-success loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub success: bool,
    pub calls: usize,
    pub fidelity: f64,
    pub frame: Option<PauliFrame>,
}

impl From<RoundResult> for Attempt {
    fn from(r: RoundResult) -> Self {
        Self { success: r.outcome == Outcome::Success, calls: r.calls_used, fidelity: r.fidelity, frame: Some(r.frame) }
    }
}

/// Bernoulli attempt with one call, for protocol-agnostic statistics.
pub fn bernoulli_attempt<R: Rng>(p: f64, rng: &mut R) -> Attempt {
    Attempt { success: rng.random::<f64>() < p, calls: 1, fidelity: 1.0, frame: None }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub rounds: usize,
    pub calls: usize,
    pub success: bool,
    /// Fidelity of the final state to its target (last attempt).
    pub fidelity: f64,
    pub frames: Vec<PauliFrame>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RusStatistics {
    pub trials: usize,
    pub max_rounds: usize,
    pub p_nominal: f64,
    pub successes: usize,
    pub failure_fraction: f64,
    /// `(1 - p)^N`
    pub expected_failure_fraction: f64,
    /// `success_curve[r]`: fraction of trials done by round `r + 1`.
    pub success_curve: Vec<f64>,
    pub expected_curve: Vec<f64>,
    pub mean_rounds: f64,
    pub mean_calls: f64,
    /// Mean rounds over successful trials.
    pub mean_rounds_to_success: f64,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

/// Runs `trials` independent loops of at most `max_rounds` attempts each.
pub fn repeat_until_success<F>(round_fn: F, p_nominal: f64, max_rounds: usize, trials: usize, seed: u64) -> Result<RusStatistics>
where
    F: Fn(&mut ChaCha8Rng) -> Result<Attempt> + Sync,
{
    if max_rounds == 0 {
        return Err(Error::InvalidArgument("max_rounds must be at least 1".into()));
    }
    let records = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let mut rec = TrialRecord { rounds: 0, calls: 0, success: false, fidelity: 0.0, frames: Vec::new() };
            while rec.rounds < max_rounds {
                let a = round_fn(&mut rng)?;
                rec.rounds += 1;
                rec.calls += a.calls;
                rec.fidelity = a.fidelity;
                rec.frames.extend(a.frame);
                if a.success {
                    rec.success = true;
                    break;
                }
            }
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;

    let n = trials.max(1) as f64;
    let successes = records.iter().filter(|r| r.success).count();
    let mut by_round = vec![0usize; max_rounds];
    for r in records.iter().filter(|r| r.success) {
        by_round[r.rounds - 1] += 1;
    }
    let mut cum = 0;
    let success_curve = by_round
        .iter()
        .map(|k| {
            cum += k;
            cum as f64 / n
        })
        .collect();
    let expected_curve = (1..=max_rounds).map(|r| 1.0 - (1.0 - p_nominal).powi(r as i32)).collect();
    let succ_rounds: usize = records.iter().filter(|r| r.success).map(|r| r.rounds).sum();
    Ok(RusStatistics {
        trials,
        max_rounds,
        p_nominal,
        successes,
        failure_fraction: (trials - successes) as f64 / n,
        expected_failure_fraction: (1.0 - p_nominal).powi(max_rounds as i32),
        success_curve,
        expected_curve,
        mean_rounds: records.iter().map(|r| r.rounds).sum::<usize>() as f64 / n,
        mean_calls: records.iter().map(|r| r.calls).sum::<usize>() as f64 / n,
        mean_rounds_to_success: if successes > 0 { succ_rounds as f64 / successes as f64 } else { f64::NAN },
        records,
    })
}

fn j_y(a: &str, b: &str) -> LabeledOperator {
    choi_of_unitary(&pauli_y()).expect("Y is unitary").into_choi().relabeled(&[a, b]).expect("two labels")
}

/// Success branch of the teleportation protocol as a one-slot comb,
/// `(1/4) J_Y^{I0 O1} ⊗ J_Y^{I1 O0}`, implementing `U -> U†` with `p = 1/4`.
pub fn teleportation_sstgs() -> OneSlotComb {
    let op = j_y(OPEN_IN, &output(1)).tensor(&j_y(&input(1), OPEN_OUT)).expect("distinct labels").scaled(0.25);
    OneSlotComb::new(op, crate::channels::TargetMap::Inverse, 0.25).expect("valid one-slot comb")
}

/// `(1/2) I^{I0 O1} ⊗ J_Y^{I1 O0} - S_stgs`, which completes the success
/// branch to a deterministic comb.
pub fn teleportation_complement() -> LabeledOperator {
    let id = LabeledOperator::identity(SpaceRegistry::new([(OPEN_IN.to_string(), 2), (output(1), 2)]).expect("distinct"));
    let det = id.tensor(&j_y(&input(1), OPEN_OUT)).expect("distinct labels").scaled(0.5);
    det.sub(&teleportation_sstgs().choi).expect("same spaces")
}
