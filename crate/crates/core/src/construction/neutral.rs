use crate::combs::Residual;
use crate::error::Result;
use crate::labels::{self, input, output, OPEN_IN};
use crate::tensor::{
    c, hermitian_basis, symmetric_sandwich, tensor_all, CMatrix, LabeledOperator, SpaceRegistry, ONE,
};

use super::antisym::AntisymCoefficients;
use super::decomposition::{weighted_h, OneSlotDecomposition};

/// `Tr_{O0} N` for the `d`-slot construction, on `(I0, I1, O1, ..., Id, Od)`.
#[derive(Clone, Debug)]
pub struct NeutralPartial {
    pub operator: LabeledOperator,
    pub epsilon: f64,
    /// The four modified causal equations, in chain order.
    pub causal: Vec<Residual>,
    /// `‖Π N Π - I^{I0}/d0 ⊗ Tr_{I0}(Π N Π)‖`
    pub symmetric_residual: f64,
    /// `‖Π C_j Π‖` for every traceless `g_j`.
    pub cj_residuals: Vec<f64>,
}

impl NeutralPartial {
    pub fn max_causal_residual(&self) -> f64 {
        self.causal.iter().map(|r| r.residual).fold(0.0, f64::max)
    }
}

pub(crate) fn partial_registry(d0: usize, d: usize) -> SpaceRegistry {
    let mut spaces = vec![(OPEN_IN.to_string(), d0)];
    spaces.extend(labels::slot_labels(d).into_iter().map(|l| (l, d)));
    SpaceRegistry::new(spaces).expect("distinct labels")
}

fn on(label: &str, m: &CMatrix) -> LabeledOperator {
    LabeledOperator::on([(label, m.nrows())], m.clone()).expect("square")
}

/// Calls `sink(name, op, factor)` for every line of the construction; the
/// line equals `factor · op ⊗ I` on the spaces `op` does not mention.
fn for_each_line<F>(dec: &OneSlotDecomposition, coeffs: &AntisymCoefficients, epsilon: f64, mut sink: F) -> Result<()>
where
    F: FnMut(String, &LabeledOperator, f64) -> Result<()>,
{
    let (d0, d) = (dec.d0, dec.d);
    let g = hermitian_basis(d)?;
    let pairs = 1.0 / (d.pow(d as u32 - 1)) as f64;
    let inputs: Vec<String> = (1..=d).map(input).collect();
    let o1 = output(1);

    sink("bulk".into(), &LabeledOperator::scalar(ONE), 1.0 / d.pow(d as u32) as f64)?;
    let tr_i0 = dec.marginal().partial_trace(&[OPEN_IN])?;
    sink("marginal".into(), &tr_i0, -epsilon * pairs / d0 as f64)?;

    let alpha_on = |slot_label: &str| -> Result<LabeledOperator> {
        let mut acc: Option<LabeledOperator> = None;
        for j in 0..d * d - 1 {
            let term = weighted_h(&dec.alpha, j, d0, OPEN_IN)?.tensor(&on(slot_label, g.get(j + 1)))?;
            acc = Some(match acc {
                Some(a) => a.add(&term)?,
                None => term,
            });
        }
        Ok(acc.expect("d >= 2"))
    };
    sink("alpha slot 1".into(), &alpha_on(&inputs[0])?, -epsilon * pairs)?;
    sink("alpha slot 2".into(), &alpha_on(&inputs[1])?, epsilon * pairs)?;

    // β lines share the `h_i ⊗ [X_m on I1..Im] ⊗ g_j^{O1}` shape, X_1 = I.
    let beta_with = |x: &LabeledOperator| -> Result<LabeledOperator> {
        let mut acc: Option<LabeledOperator> = None;
        for j in 0..d * d - 1 {
            let term = tensor_all(&[weighted_h(&dec.beta, j, d0, OPEN_IN)?, x.clone(), on(&o1, g.get(j + 1))])?;
            acc = Some(match acc {
                Some(a) => a.add(&term)?,
                None => term,
            });
        }
        Ok(acc.expect("d >= 2"))
    };
    sink("beta".into(), &beta_with(&LabeledOperator::scalar(ONE))?, -epsilon * pairs)?;
    for m in 2..=d {
        sink(format!("cascade m={m}"), &beta_with(&coeffs.group_operator(m, &inputs)?)?, -epsilon * pairs)?;
    }
    Ok(())
}

/// Every line of the construction as a full operator (small `d` only).
pub fn neutral_partial_lines(
    dec: &OneSlotDecomposition,
    coeffs: &AntisymCoefficients,
    epsilon: f64,
) -> Result<Vec<(String, LabeledOperator)>> {
    let registry = partial_registry(dec.d0, dec.d);
    let mut lines = Vec::new();
    for_each_line(dec, coeffs, epsilon, |name, op, factor| {
        let mut full = LabeledOperator::zeros(registry.clone());
        full.add_embedded(op, factor)?;
        lines.push((name, full));
        Ok(())
    })?;
    Ok(lines)
}

/// `F = (I/d - ε Tr_{O0} S_stgs) ⊗ I/d ⊗ ... ⊗ I/d`, without the `O0` factor.
pub fn failure_partial(reduced: &LabeledOperator, d0: usize, d: usize, epsilon: f64) -> Result<LabeledOperator> {
    let f3 = failure_one_slot(reduced, d, epsilon);
    let mut out = LabeledOperator::zeros(partial_registry(d0, d));
    out.add_embedded(&f3, 1.0 / d.pow(d as u32 - 1) as f64)?;
    Ok(out)
}

fn failure_one_slot(reduced: &LabeledOperator, d: usize, epsilon: f64) -> LabeledOperator {
    let id = LabeledOperator::identity(reduced.registry().clone()).scaled(1.0 / d as f64);
    let mut f = id;
    *f.matrix_mut() -= reduced.matrix() * c(epsilon);
    f
}

pub fn build_neutral_partial(
    dec: &OneSlotDecomposition,
    coeffs: &AntisymCoefficients,
    epsilon: f64,
) -> Result<NeutralPartial> {
    let registry = partial_registry(dec.d0, dec.d);
    let mut operator = LabeledOperator::zeros(registry);
    for_each_line(dec, coeffs, epsilon, |_, op, factor| operator.add_embedded(op, factor))?;
    let causal = modified_causal_residuals(&operator, dec, epsilon)?;
    let symmetric_residual = symmetric_condition_residual(&operator, dec.d)?;
    let cj_residuals = cj_residuals(coeffs)?;
    Ok(NeutralPartial { operator, epsilon, causal, symmetric_residual, cj_residuals })
}

fn id_on(label: &str, d: usize) -> LabeledOperator {
    LabeledOperator::identity(SpaceRegistry::new([(label, d)]).expect("one space"))
}

/// The chain `Tr_{Ok}` / `Tr_{Ik}` on `Tr_{O0} N`, with the slot-2 equation
/// carrying the `d^{d-1} (F^{I0 I1 O1} - F^{I0 I1} ⊗ I/d)` source term.
fn modified_causal_residuals(n: &LabeledOperator, dec: &OneSlotDecomposition, epsilon: f64) -> Result<Vec<Residual>> {
    let (d0, d) = (dec.d0, dec.d);
    let df = d as f64;
    let mut out = Vec::new();
    let od = output(d);
    let mut level = n.partial_trace(&[&od])?;
    out.push(Residual {
        equation: format!("Tr_O0 N = N^({d}) ⊗ I^{od}/d"),
        residual: n.distance(&level.tensor(&id_on(&od, d))?.scaled(1.0 / df))?,
    });
    for k in (2..=d).rev() {
        let ik = input(k);
        let ok1 = output(k - 1);
        let lhs = level.partial_trace(&[&ik])?;
        let lower = lhs.partial_trace(&[&ok1])?;
        let diff = lhs.sub(&lower.tensor(&id_on(&ok1, d))?.scaled(1.0 / df))?;
        let residual = if k == 2 {
            let f3 = failure_one_slot(dec.reduced(), d, epsilon);
            let f2 = f3.partial_trace(&[&ok1])?;
            let source = f3.sub(&f2.tensor(&id_on(&ok1, d))?.scaled(1.0 / df))?;
            diff.distance(&source.scaled(df.powi(d as i32 - 1)))?
        } else {
            diff.frobenius_norm()
        };
        out.push(Residual { equation: format!("Tr_{ik} N^({k}) - N^({}) ⊗ I^{ok1}/d", k - 1), residual });
        level = lower;
    }
    let last = level.partial_trace(&[input(1)])?;
    let expected = LabeledOperator::identity(last.registry().clone()).scaled_complex(n.trace() * c(1.0 / d0 as f64));
    out.push(Residual { equation: "Tr_I1 N^(1) = Tr N · I^I0/d0".into(), residual: last.distance(&expected)? });
    Ok(out)
}

pub(crate) fn symmetric_condition_residual(n: &LabeledOperator, slots: usize) -> Result<f64> {
    let d0 = n.registry().dim_of(OPEN_IN)?;
    let sym = symmetric_sandwich(n, slots)?;
    let reduced = sym.partial_trace(&[OPEN_IN])?;
    let rebuilt = id_on(OPEN_IN, d0).scaled(1.0 / d0 as f64).tensor(&reduced)?;
    sym.distance(&rebuilt)
}

/// `C_j = d^d A_d^{I} ⊗ g_j^{O1} ⊗ I^{O2..Od}/d^{d-1}` via the coefficient cascade.
pub fn cj_operator(coeffs: &AntisymCoefficients, j: usize) -> Result<LabeledOperator> {
    let d = coeffs.d;
    let inputs: Vec<String> = (1..=d).map(input).collect();
    let g = hermitian_basis(d)?;
    let mut parts = vec![coeffs.cascade_operator(&inputs)?, on(&output(1), g.get(j))];
    for k in 2..=d {
        parts.push(id_on(&output(k), d).scaled(1.0 / d as f64));
    }
    let slots = SpaceRegistry::new(labels::slot_labels(d).into_iter().map(|l| (l, d)))?;
    tensor_all(&parts)?.aligned_to(&slots)
}

fn cj_residuals(coeffs: &AntisymCoefficients) -> Result<Vec<f64>> {
    let d = coeffs.d;
    (1..d * d)
        .map(|j| Ok(symmetric_sandwich(&cj_operator(coeffs, j)?, d)?.frobenius_norm()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::{antisym_coefficients, decompose_one_slot, OneSlotComb};
    use super::*;
    use crate::tensor::min_eigenvalue;

    #[test]
    fn zero_epsilon_is_flat() {
        let dec = decompose_one_slot(&OneSlotComb::identity_wiring(2).unwrap()).unwrap();
        let coeffs = antisym_coefficients(2).unwrap();
        let np = build_neutral_partial(&dec, &coeffs, 0.0).unwrap();
        let flat = LabeledOperator::identity(partial_registry(2, 2)).scaled(0.25);
        assert!(np.operator.distance(&flat).unwrap() < 1e-15);
        assert!(np.symmetric_residual < 1e-15);
    }

    #[test]
    fn identity_wiring_partial_checks_d2() {
        let dec = decompose_one_slot(&OneSlotComb::identity_wiring(2).unwrap()).unwrap();
        let coeffs = antisym_coefficients(2).unwrap();
        let np = build_neutral_partial(&dec, &coeffs, 0.05).unwrap();
        assert!(np.max_causal_residual() < 1e-12, "{:?}", np.causal);
        assert!(np.symmetric_residual < 1e-12);
        assert!(np.cj_residuals.iter().all(|&r| r < 1e-12));
        assert!(min_eigenvalue(&np.operator).unwrap() > 0.0);
    }

    #[test]
    fn lines_sum_to_operator_and_failure() {
        let s = OneSlotComb::identity_wiring(2).unwrap();
        let dec = decompose_one_slot(&s).unwrap();
        let coeffs = antisym_coefficients(2).unwrap();
        let eps = 0.07;
        let np = build_neutral_partial(&dec, &coeffs, eps).unwrap();
        let lines = neutral_partial_lines(&dec, &coeffs, eps).unwrap();
        let mut total = LabeledOperator::zeros(np.operator.registry().clone());
        let mut f = total.clone();
        for (name, op) in &lines {
            total = total.add(op).unwrap();
            if name != "alpha slot 2" && !name.starts_with("cascade") {
                f = f.add(op).unwrap();
            }
        }
        assert!(total.distance(&np.operator).unwrap() < 1e-14);
        let expect = failure_partial(&s.reduced().unwrap(), 2, 2, eps).unwrap();
        assert!(f.distance(&expect).unwrap() < 1e-10);
    }
}
