//! The success-or-draw construction: from a one-slot probabilistic comb
//! `S_stgs` to a `d`-slot pair `(S, N)` with `N` neutralizing every unitary.

mod antisym;
mod decomposition;
mod ico;
mod lift;
mod neutral;
mod pipeline;

pub use antisym::{antisym_coefficients, AntisymCoefficients};
pub use decomposition::{decompose_one_slot, OneSlotComb, OneSlotDecomposition, GAMMA_TOL};
pub use ico::{build_ico_neutral, eta_coefficients, IcoNeutral, IcoReport};
pub use lift::{lift_neutral, neutralization_residual, LiftResult};
pub use neutral::{build_neutral_partial, cj_operator, failure_partial, neutral_partial_lines, NeutralPartial};
pub use pipeline::{
    build_success_or_draw, build_success_part, choose_epsilon, SodOptions, SuccessOrDraw, DEFAULT_MARGIN,
    EPSILON_RESOLUTION,
};
