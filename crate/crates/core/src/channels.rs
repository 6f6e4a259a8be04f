//! Quantum channels as Choi operators, Haar sampling and the unitary-span /
//! twirl oracles.
//!
//! Choi convention: `J = sum_ij |i><j| ⊗ Λ(|i><j|)` on `(in, out)`. For a
//! unitary, `J_U = |U>><<U|` with the column-stacking vector
//! `|U>> = sum_j |j> ⊗ U|j>`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{c, min_eigenvalue, CMatrix, LabeledOperator, SpaceRegistry, ONE};

pub const IN: &str = "in";
pub const OUT: &str = "out";

/// A channel in Choi form on the two spaces `in_label`, `out_label`.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    choi: LabeledOperator,
    in_label: String,
    out_label: String,
}

impl Channel {
    pub fn from_choi(choi: LabeledOperator, in_label: &str, out_label: &str) -> Result<Self> {
        if choi.registry().len() != 2 {
            return Err(Error::DimensionMismatch("a channel Choi operator lives on two spaces".into()));
        }
        let choi = choi.reorder(&[in_label, out_label])?;
        Ok(Self { choi, in_label: in_label.into(), out_label: out_label.into() })
    }

    /// Choi operator from a raw `(d_in d_out) x (d_in d_out)` matrix on `(in, out)`.
    pub fn from_matrix(matrix: CMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        let choi = LabeledOperator::on([(IN, d_in), (OUT, d_out)], matrix)?;
        Self::from_choi(choi, IN, OUT)
    }

    pub fn choi(&self) -> &LabeledOperator {
        &self.choi
    }

    pub fn into_choi(self) -> LabeledOperator {
        self.choi
    }

    pub fn in_label(&self) -> &str {
        &self.in_label
    }

    pub fn out_label(&self) -> &str {
        &self.out_label
    }

    pub fn d_in(&self) -> usize {
        self.choi.registry().spaces()[0].dim
    }

    pub fn d_out(&self) -> usize {
        self.choi.registry().spaces()[1].dim
    }

    /// The same channel with its ports renamed.
    pub fn with_labels(&self, in_label: &str, out_label: &str) -> Result<Self> {
        Ok(Self {
            choi: self.choi.relabeled(&[in_label, out_label])?,
            in_label: in_label.into(),
            out_label: out_label.into(),
        })
    }
}

pub fn unitarity_residual(u: &CMatrix) -> f64 {
    (u.adjoint() * u - CMatrix::identity(u.ncols(), u.ncols())).norm()
}

/// `|U>> = sum_j |j> ⊗ U|j>`, i.e. `vec[j * d + i] = U[i, j]`.
pub fn vectorize(u: &CMatrix) -> DVector<Complex64> {
    let d = u.nrows();
    DVector::from_fn(d * u.ncols(), |k, _| u[(k % d, k / d)])
}

pub fn choi_of_unitary(u: &CMatrix) -> Result<Channel> {
    if u.nrows() != u.ncols() {
        return Err(Error::DimensionMismatch("unitary must be square".into()));
    }
    let r = unitarity_residual(u);
    if r > 1e-10 {
        return Err(Error::NotUnitary(r));
    }
    let v = vectorize(u);
    Channel::from_matrix(&v * v.adjoint(), u.nrows(), u.nrows())
}

/// `J_id = d φ+`
pub fn identity_channel(d: usize) -> Channel {
    choi_of_unitary(&CMatrix::identity(d, d)).expect("identity is unitary")
}

/// Completely depolarizing channel, Choi `I ⊗ I / d`.
pub fn depolarizing_channel(d: usize) -> Channel {
    Channel::from_matrix(CMatrix::identity(d * d, d * d) * c(1.0 / d as f64), d, d)
        .expect("shape matches")
}

/// Projector onto `|φ+> = (1/sqrt d) sum_i |ii>` as a plain matrix.
pub fn phi_plus(d: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d * d, d * d);
    let w = c(1.0 / d as f64);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = w;
        }
    }
    m
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub cp: bool,
    pub tp: bool,
    pub unital: bool,
    pub min_eigenvalue: f64,
    pub tp_residual: f64,
    pub unital_residual: f64,
}

pub fn validate_channel(ch: &Channel, tol: f64) -> ChannelReport {
    let min_eig = min_eigenvalue(ch.choi()).unwrap_or(f64::NEG_INFINITY);
    let tp_residual = ch
        .choi()
        .partial_trace(&[ch.out_label()])
        .map(|m| (m.matrix() - CMatrix::identity(ch.d_in(), ch.d_in())).norm())
        .unwrap_or(f64::INFINITY);
    let unital_residual = ch
        .choi()
        .partial_trace(&[ch.in_label()])
        .map(|m| (m.matrix() - CMatrix::identity(ch.d_out(), ch.d_out())).norm())
        .unwrap_or(f64::INFINITY);
    ChannelReport {
        cp: min_eig >= -tol,
        tp: tp_residual <= tol,
        unital: unital_residual <= tol,
        min_eigenvalue: min_eig,
        tp_residual,
        unital_residual,
    }
}

/// `Tr_in[J (ρ^T ⊗ I)]`
pub fn apply_channel(ch: &Channel, rho: &CMatrix) -> Result<CMatrix> {
    if rho.nrows() != ch.d_in() || rho.ncols() != ch.d_in() {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{}, channel input dimension is {}",
            rho.nrows(),
            rho.ncols(),
            ch.d_in()
        )));
    }
    let rho_t = LabeledOperator::on([(ch.in_label(), ch.d_in())], rho.transpose())?;
    Ok(ch.choi().contract(&rho_t)?.into_matrix())
}

/// Seeded stream of Haar-random unitaries (QR of a complex Ginibre matrix
/// with the diagonal phases of `R` pushed into `Q`).
pub struct HaarSampler {
    rng: ChaCha8Rng,
}

impl HaarSampler {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn from_rng(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }

    pub fn sample(&mut self, d: usize) -> CMatrix {
        let scale = std::f64::consts::FRAC_1_SQRT_2;
        let g = DMatrix::from_fn(d, d, |_, _| {
            let re: f64 = StandardNormal.sample(&mut self.rng);
            let im: f64 = StandardNormal.sample(&mut self.rng);
            Complex64::new(re * scale, im * scale)
        });
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..d {
            let rjj = r[(j, j)];
            let phase = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
            for i in 0..d {
                q[(i, j)] *= phase;
            }
        }
        q
    }

    pub fn state(&mut self, d: usize) -> DVector<Complex64> {
        self.sample(d).column(0).into_owned()
    }
}

pub fn haar_unitary(d: usize, seed: u64) -> CMatrix {
    HaarSampler::new(seed).sample(d)
}

/// Number of singular values above `rel_tol` times the largest.
pub fn numerical_rank(columns: &[DVector<Complex64>], rel_tol: f64) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let m = DMatrix::from_columns(columns);
    let sv = m.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

#[derive(Clone, Debug)]
pub struct SpanOptions {
    pub rank_tol: f64,
    /// Consecutive non-increasing additions required to declare the rank stable.
    pub patience: usize,
    pub max_samples: usize,
}

impl Default for SpanOptions {
    fn default() -> Self {
        Self { rank_tol: 1e-8, patience: 10, max_samples: 2000 }
    }
}

#[derive(Clone, Debug)]
pub struct SpanDimension {
    pub dim: usize,
    /// A rank-sized subset whose `J_U^{⊗K}` are linearly independent.
    pub spanning_unitaries: Vec<CMatrix>,
    /// Rank after each drawn sample.
    pub rank_history: Vec<usize>,
}

/// `J_U^{⊗K}` flattened to a vector.
pub fn choi_power_vector(u: &CMatrix, copies: usize) -> DVector<Complex64> {
    let j = choi_of_unitary(u).expect("sampled unitary").into_choi().into_matrix();
    let mut acc = CMatrix::from_element(1, 1, ONE);
    for _ in 0..copies {
        acc = acc.kronecker(&j);
    }
    let n = acc.len();
    DVector::from_iterator(n, acc.iter().copied())
}

pub fn span_dimension(d: usize, copies: usize, seed: u64, opts: &SpanOptions) -> Result<SpanDimension> {
    if d < 2 || copies < 1 {
        return Err(Error::InvalidArgument(format!("span dimension needs d >= 2 and K >= 1, got d={d} K={copies}")));
    }
    let mut sampler = HaarSampler::new(seed);
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    let mut spanning = Vec::new();
    let mut history = Vec::new();
    let mut stable = 0;
    while stable < opts.patience {
        if history.len() >= opts.max_samples {
            return Err(Error::NonConvergence(opts.max_samples));
        }
        let u = sampler.sample(d);
        let v = choi_power_vector(&u, copies);
        basis.push(v);
        if numerical_rank(&basis, opts.rank_tol) > spanning.len() {
            spanning.push(u);
            stable = 0;
        } else {
            basis.pop();
            stable += 1;
        }
        history.push(spanning.len());
    }
    Ok(SpanDimension { dim: spanning.len(), spanning_unitaries: spanning, rank_history: history })
}

#[derive(Clone, Debug)]
pub struct TwirlResult {
    pub exact: LabeledOperator,
    pub estimate: LabeledOperator,
    pub samples: usize,
    /// Frobenius norm of `estimate - exact`.
    pub deviation: f64,
}

/// Spaces of `|U*>> ⊗ |U>>`: `(in*, out*, in, out)`.
pub fn twirl_registry(d: usize) -> SpaceRegistry {
    SpaceRegistry::new([("in*", d), ("out*", d), ("in", d), ("out", d)]).expect("distinct labels")
}

/// `Q = (1/(d²-1)) P1^A ⊗ P1^B + P2^A ⊗ P2^B`, with `A = (out*, out)` the
/// factors a left multiplication `U -> VU` acts on, `B = (in*, in)`,
/// `P2 = φ+` and `P1 = I - φ+`.
pub fn twirl_exact(d: usize) -> Result<LabeledOperator> {
    let p2 = phi_plus(d);
    let p1 = CMatrix::identity(d * d, d * d) - &p2;
    let m = p1.kronecker(&p1) * c(1.0 / (d * d - 1) as f64) + p2.kronecker(&p2);
    LabeledOperator::on([("out*", d), ("out", d), ("in*", d), ("in", d)], m)?.aligned_to(&twirl_registry(d))
}

#[allow(non_snake_case)]
pub fn twirl_Q(d: usize, samples: usize, seed: u64) -> Result<TwirlResult> {
    if d < 2 || samples == 0 {
        return Err(Error::InvalidArgument("twirl needs d >= 2 and at least one sample".into()));
    }
    let exact = twirl_exact(d)?;
    let mut sampler = HaarSampler::new(seed);
    let n = d.pow(4);
    let mut acc = CMatrix::zeros(n, n);
    for _ in 0..samples {
        let u = sampler.sample(d);
        let v = vectorize(&u.map(|z| z.conj())).kronecker(&vectorize(&u));
        acc += &v * v.adjoint();
    }
    acc *= c(1.0 / samples as f64);
    let estimate = LabeledOperator::new(twirl_registry(d), acc)?;
    let deviation = estimate.distance(&exact)?;
    Ok(TwirlResult { exact, estimate, samples, deviation })
}

/// Unitary-to-channel maps a one-slot comb may target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMap {
    Identity,
    Inverse,
    Transpose,
    Conjugate,
}

impl TargetMap {
    pub fn unitary(&self, u: &CMatrix) -> CMatrix {
        match self {
            TargetMap::Identity => u.clone(),
            TargetMap::Inverse => u.adjoint(),
            TargetMap::Transpose => u.transpose(),
            TargetMap::Conjugate => u.map(|z| z.conj()),
        }
    }

    pub fn choi(&self, u: &CMatrix) -> Result<Channel> {
        choi_of_unitary(&self.unitary(u))
    }
}

impl std::str::FromStr for TargetMap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "inverse" => Ok(Self::Inverse),
            "transpose" => Ok(Self::Transpose),
            "conjugate" => Ok(Self::Conjugate),
            other => Err(Error::InvalidArgument(format!("unknown target map `{other}`"))),
        }
    }
}

#[cfg(test)]
pub(crate) fn pure_state(v: &DVector<Complex64>) -> CMatrix {
    v * v.adjoint()
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ZERO;

    fn pauli_x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    #[test]
    fn identity_choi_is_d_phi_plus() {
        for d in 2..=3 {
            let j = identity_channel(d);
            assert!((j.choi().matrix() - phi_plus(d) * c(d as f64)).norm() < 1e-14);
        }
    }

    #[test]
    fn pauli_x_choi_entries() {
        let j = choi_of_unitary(&pauli_x()).unwrap();
        // |X>> = |0>|1> + |1>|0>  -> indices 1 and 2
        let mut expected = CMatrix::zeros(4, 4);
        for (a, b) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            expected[(a, b)] = ONE;
        }
        assert_eq!(j.choi().matrix(), &expected);
        assert!((j.choi().trace() - c(2.0)).norm() < 1e-15);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = CMatrix::identity(2, 2) * c(2.0);
        assert!(matches!(choi_of_unitary(&m), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn haar_choi_rank_one_trace_d() {
        let mut s = HaarSampler::new(11);
        for _ in 0..20 {
            let u = s.sample(3);
            let j = choi_of_unitary(&u).unwrap();
            let sv = j.choi().matrix().singular_values();
            assert_eq!(sv.iter().filter(|&&x| x > 1e-10).count(), 1);
            assert!((j.choi().trace() - c(3.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn validate_examples() {
        let r = validate_channel(&identity_channel(2), 1e-10);
        assert!(r.cp && r.tp && r.unital);
        let r = validate_channel(&depolarizing_channel(3), 1e-10);
        assert!(r.cp && r.tp);
        let half = Channel::from_choi(identity_channel(2).choi().scaled(0.5), IN, OUT).unwrap();
        assert!(!validate_channel(&half, 1e-10).tp);
    }

    #[test]
    fn apply_unitary_channel() {
        let mut s = HaarSampler::new(5);
        for _ in 0..20 {
            let u = s.sample(2);
            let psi = s.state(2);
            let rho = pure_state(&psi);
            let out = apply_channel(&choi_of_unitary(&u).unwrap(), &rho).unwrap();
            assert!((out - &u * &rho * u.adjoint()).norm() < 1e-12);
            let same = apply_channel(&identity_channel(2), &rho).unwrap();
            assert!((same - &rho).norm() < 1e-12);
        }
    }

    #[test]
    fn depolarizing_outputs_maximally_mixed() {
        let psi = HaarSampler::new(3).state(3);
        let out = apply_channel(&depolarizing_channel(3), &pure_state(&psi)).unwrap();
        assert!((out - CMatrix::identity(3, 3) * c(1.0 / 3.0)).norm() < 1e-12);
    }

    #[test]
    fn apply_rejects_wrong_dimension() {
        let rho = CMatrix::identity(3, 3);
        assert!(matches!(apply_channel(&identity_channel(2), &rho), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        let a = haar_unitary(4, 99);
        let b = haar_unitary(4, 99);
        assert!(unitarity_residual(&a) < 1e-12);
        assert_eq!(a, b);
        assert_ne!(a, haar_unitary(4, 100));
    }

    #[test]
    fn haar_twirl_of_pure_state_is_maximally_mixed() {
        let mut s = HaarSampler::new(2024);
        let psi = s.state(2);
        let rho = pure_state(&psi);
        let mut acc = CMatrix::zeros(2, 2);
        let n = 5000;
        for _ in 0..n {
            let u = s.sample(2);
            acc += &u * &rho * u.adjoint();
        }
        acc *= c(1.0 / n as f64);
        assert!((acc - CMatrix::identity(2, 2) * c(0.5)).norm() <= 0.05);
    }

    #[test]
    fn span_dimension_single_copy() {
        let opts = SpanOptions::default();
        assert_eq!(span_dimension(2, 1, 1, &opts).unwrap().dim, 10);
        assert_eq!(span_dimension(3, 1, 1, &opts).unwrap().dim, 65);
    }

    #[test]
    fn span_history_monotone() {
        let r = span_dimension(2, 2, 3, &SpanOptions::default()).unwrap();
        assert!(r.rank_history.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(*r.rank_history.last().unwrap(), r.dim);
        assert_eq!(r.spanning_unitaries.len(), r.dim);
    }

    #[test]
    fn span_cap_reports_non_convergence() {
        let opts = SpanOptions { max_samples: 5, ..SpanOptions::default() };
        assert!(matches!(span_dimension(2, 1, 1, &opts), Err(Error::NonConvergence(5))));
    }

    #[test]
    fn exact_twirl_rank_and_spectrum() {
        let q = twirl_exact(2).unwrap();
        let (vals, _) = crate::tensor::eigh(q.matrix()).unwrap();
        let rank = vals.iter().filter(|&&v| v > 1e-10).count();
        assert_eq!(rank, 10);
        for v in vals {
            assert!([0.0, 1.0 / 3.0, 1.0].iter().any(|t| (v - t).abs() < 1e-10), "eigenvalue {v}");
        }
    }

    #[test]
    fn exact_twirl_left_invariance() {
        let q = twirl_exact(2).unwrap();
        let mut s = HaarSampler::new(8);
        let id = CMatrix::identity(2, 2);
        for _ in 0..10 {
            let v = s.sample(2);
            // V* on out*, V on out
            let w = id.kronecker(&v.map(|z| z.conj())).kronecker(&id).kronecker(&v);
            let conj = &w * q.matrix() * w.adjoint();
            assert!((conj - q.matrix()).norm() < 1e-10);
        }
    }
}
