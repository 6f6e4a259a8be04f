use serde::{Deserialize, Serialize};

use crate::channels::HaarSampler;
use crate::combs::{Comb, CombStructure, SodCertificate};
use crate::error::{Error, Result};
use crate::labels::OPEN_OUT;
use crate::tensor::{min_eigenvalue, symmetric_projector, LabeledOperator};

use super::antisym::{antisym_coefficients, AntisymCoefficients};
use super::decomposition::{decompose_one_slot, OneSlotComb, OneSlotDecomposition};
use super::lift::{lift_neutral, LiftResult};
use super::neutral::{build_neutral_partial, NeutralPartial};

/// `S = ε S_stgs ⊗ I^{I2 O2}/d ⊗ ... ⊗ I^{IK OK}/d`
pub fn build_success_part(s: &OneSlotComb, epsilon: f64, slots: usize) -> Result<Comb> {
    if slots == 0 {
        return Err(Error::InvalidArgument("success part needs at least one slot".into()));
    }
    let structure = CombStructure::new(slots, s.d(), s.d0())?;
    let mut choi = LabeledOperator::zeros(structure.registry());
    choi.add_embedded(&s.choi, epsilon / s.d().pow(slots as u32 - 1) as f64)?;
    Comb::new(structure, choi)
}

/// Everything needed to evaluate one value of `ε`.
struct Stages {
    dec: OneSlotDecomposition,
    coeffs: AntisymCoefficients,
    projector: LabeledOperator,
    d: usize,
}

impl Stages {
    fn new(s: &OneSlotComb, d: usize) -> Result<Self> {
        if d != s.d() {
            return Err(Error::InvalidArgument(format!(
                "the construction uses d = {} slots for slot dimension {}, got {d}",
                s.d(),
                s.d()
            )));
        }
        let dec = decompose_one_slot(s)?;
        if dec.gamma_flagged {
            return Err(Error::Decomposition(dec.max_gamma));
        }
        Ok(Self { dec, coeffs: antisym_coefficients(d)?, projector: symmetric_projector(d, d)?, d })
    }

    fn scale(&self) -> f64 {
        self.d.pow(self.d as u32) as f64
    }

    fn partial(&self, epsilon: f64) -> Result<NeutralPartial> {
        build_neutral_partial(&self.dec, &self.coeffs, epsilon)
    }

    fn lift(&self, partial: &NeutralPartial) -> Result<LiftResult> {
        lift_neutral(&partial.operator.scaled(self.scale()), &self.projector, OPEN_OUT)
    }

    /// Smaller of the two minimum eigenvalues, each rescaled to `N` units.
    fn margin_at(&self, epsilon: f64) -> Result<f64> {
        let partial = self.partial(epsilon)?;
        let np = min_eigenvalue(&partial.operator)?;
        let lifted = self.lift(&partial)?.min_eigenvalue_on_support / self.scale();
        Ok(np.min(lifted))
    }
}

pub const EPSILON_RESOLUTION: f64 = 1e-4;
pub const DEFAULT_MARGIN: f64 = 1e-10;
const EPSILON_FLOOR: f64 = 1e-6;

/// Largest `ε ∈ (0, 1]` on a bisection grid for which `Tr_{O0} N` and the
/// lifted `N` keep a minimum eigenvalue (on their supports) of at least `margin`.
pub fn choose_epsilon(s: &OneSlotComb, d: usize, margin: f64) -> Result<f64> {
    if margin <= 0.0 {
        return Err(Error::InvalidArgument("margin must be positive".into()));
    }
    let stages = Stages::new(s, d)?;
    choose_with(&stages, margin)
}

fn choose_with(stages: &Stages, margin: f64) -> Result<f64> {
    let feasible = |eps: f64| -> Result<bool> { Ok(stages.margin_at(eps)? >= margin) };
    if feasible(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > EPSILON_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo < EPSILON_FLOOR {
        return Err(Error::Infeasible(lo));
    }
    Ok(lo)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SodOptions {
    /// `None` selects ε by bisection.
    pub epsilon: Option<f64>,
    pub margin: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SodOptions {
    fn default() -> Self {
        Self { epsilon: None, margin: DEFAULT_MARGIN, samples: 100, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct SuccessOrDraw {
    pub s: Comb,
    pub n: Comb,
    pub epsilon: f64,
    pub partial: NeutralPartial,
    pub lift: LiftResult,
    pub certificate: SodCertificate,
}

/// Decompose, pick ε, assemble `Tr_{O0} N`, lift it to `N` and certify the pair.
pub fn build_success_or_draw(s: &OneSlotComb, d: usize, opts: &SodOptions) -> Result<SuccessOrDraw> {
    let stages = Stages::new(s, d)?;
    let epsilon = match opts.epsilon {
        Some(e) if e >= 0.0 => e,
        Some(e) => return Err(Error::InvalidArgument(format!("epsilon must be non-negative, got {e}"))),
        None => choose_with(&stages, opts.margin)?,
    };
    let partial = stages.partial(epsilon)?;
    let lift = stages.lift(&partial)?;
    let structure = CombStructure::new(d, s.d(), s.d0())?;
    let n = Comb::new(structure, lift.m_abc.scaled(1.0 / stages.scale()))?;
    let success = build_success_part(s, epsilon, d)?;
    let mut sampler = HaarSampler::new(opts.seed);
    let unitaries: Vec<_> = (0..opts.samples).map(|_| sampler.sample(s.d())).collect();
    let target = s.target;
    let certificate = SodCertificate::evaluate(epsilon, &success, &n, |u| target.choi(u), &unitaries)?;
    Ok(SuccessOrDraw { s: success, n, epsilon, partial, lift, certificate })
}
