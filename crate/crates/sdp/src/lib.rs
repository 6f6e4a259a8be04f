//! Dense semidefinite programs over Hermitian PSD blocks, solved by ADMM,
//! and the unitary-inversion success-or-draw SDP.

mod inversion;
mod problem;
mod solver;

pub use inversion::{
    build_inversion_problem, optimal_inversion_probability, solve_inversion, InversionComparison, InversionProblem,
    InversionResult, NeutralMode, N_BLOCK, S_BLOCK, TELEPORTATION_P,
};
pub use problem::{hermitian_unit_basis, psd_kernel, Block, Coefficient, Constraint, SdpProblem};
pub use solver::{solve_sdp, SdpSolution, SolverOptions, Status};
