use itertools::Itertools;
use num_complex::Complex64;

use super::{c, relabel_map, CMatrix, LabeledOperator, SpaceRegistry, ONE};
use crate::error::{Error, Result};
use crate::labels;

/// A permutation of `0..n`; `images[k]` is where position `k` is sent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for &i in &images {
            if i >= images.len() || seen[i] {
                return Err(Error::InvalidArgument(format!("{images:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Self { images })
    }

    pub fn identity(n: usize) -> Self {
        Self { images: (0..n).collect() }
    }

    pub fn transposition(n: usize, a: usize, b: usize) -> Self {
        let mut images: Vec<usize> = (0..n).collect();
        images.swap(a, b);
        Self { images }
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn apply(&self, k: usize) -> usize {
        self.images[k]
    }

    pub fn inverse(&self) -> Self {
        let mut images = vec![0; self.len()];
        for (k, &i) in self.images.iter().enumerate() {
            images[i] = k;
        }
        Self { images }
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self { images: other.images.iter().map(|&i| self.images[i]).collect() }
    }

    pub fn sign(&self) -> f64 {
        let n = self.len();
        let mut seen = vec![false; n];
        let mut cycles = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            cycles += 1;
            let mut k = start;
            while !seen[k] {
                seen[k] = true;
                k = self.images[k];
            }
        }
        if (n - cycles).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

pub fn all_permutations(n: usize) -> Vec<Permutation> {
    (0..n).permutations(n).map(|images| Permutation { images }).collect()
}

/// Flat-index map of `P_sigma` on `dims`: `P_sigma |i> = |map[i]>`, where
/// the factor at position `k` is moved to position `sigma(k)`.
fn factor_permutation_map(dims: &[usize], sigma: &Permutation) -> Result<Vec<usize>> {
    if sigma.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "permutation of {} factors applied to {} spaces",
            sigma.len(),
            dims.len()
        )));
    }
    for (k, &d) in dims.iter().enumerate() {
        if dims[sigma.apply(k)] != d {
            return Err(Error::DimensionMismatch(format!(
                "factor {k} (dim {d}) sent to factor {} (dim {})",
                sigma.apply(k),
                dims[sigma.apply(k)]
            )));
        }
    }
    Ok(relabel_map(dims, sigma.inverse().images()))
}

/// Unitary permuting the tensor factors of `registry` according to `sigma`.
pub fn permutation_operator(registry: &SpaceRegistry, sigma: &Permutation) -> Result<LabeledOperator> {
    let map = factor_permutation_map(&registry.dims(), sigma)?;
    let d = registry.total_dim();
    let mut m = CMatrix::zeros(d, d);
    for (i, &j) in map.iter().enumerate() {
        m[(j, i)] = ONE;
    }
    LabeledOperator::new(registry.clone(), m)
}

/// `(I1, O1), ..., (IK, OK)`
pub fn slot_pair_labels(slots: usize) -> Vec<(String, String)> {
    (1..=slots).map(|k| (labels::input(k), labels::output(k))).collect()
}

/// Lifts a permutation of slots to a permutation of all factors of
/// `registry`: `Ik -> I sigma(k)` and `Ok -> O sigma(k)`, other spaces fixed.
pub(crate) fn slot_permutation_on(registry: &SpaceRegistry, sigma: &Permutation) -> Result<Permutation> {
    let mut images: Vec<usize> = (0..registry.len()).collect();
    for (k, (i_lab, o_lab)) in slot_pair_labels(sigma.len()).iter().enumerate() {
        let target = sigma.apply(k) + 1;
        let ip = registry.position(i_lab).ok_or_else(|| Error::UnknownLabel(i_lab.clone()))?;
        let op = registry.position(o_lab).ok_or_else(|| Error::UnknownLabel(o_lab.clone()))?;
        images[ip] = registry.position(&labels::input(target)).unwrap();
        images[op] = registry.position(&labels::output(target)).unwrap();
    }
    Permutation::new(images)
}

/// Normalized projector `(1/K!) sum_sigma P^I_sigma ⊗ P^O_sigma` on
/// `I1, O1, ..., IK, OK`, each of dimension `d`.
pub fn symmetric_projector(slots: usize, d: usize) -> Result<LabeledOperator> {
    if slots == 0 {
        return Err(Error::InvalidArgument("symmetric projector needs K >= 1".into()));
    }
    let registry = SpaceRegistry::new(labels::slot_labels(slots).into_iter().map(|l| (l, d)))?;
    let perms = all_permutations(slots);
    let weight = 1.0 / perms.len() as f64;
    let mut acc = LabeledOperator::zeros(registry.clone());
    for sigma in &perms {
        let p = permutation_operator(&registry, &slot_permutation_on(&registry, sigma)?)?;
        *acc.matrix_mut() += p.matrix() * c(weight);
    }
    Ok(acc)
}

impl LabeledOperator {
    /// Renames the spaces in place of position; dims are unchanged.
    pub fn relabeled<S: AsRef<str>>(&self, new_labels: &[S]) -> Result<Self> {
        if new_labels.len() != self.registry().len() {
            return Err(Error::InvalidArgument("relabel needs one label per space".into()));
        }
        let registry = SpaceRegistry::new(
            new_labels.iter().zip(self.registry().dims()).map(|(l, d)| (l.as_ref().to_string(), d)),
        )?;
        LabeledOperator::new(registry, self.matrix().clone())
    }

    /// `P_sigma X P_sigma^dagger` with `P_sigma` permuting the slot pairs.
    pub fn permute_slots(&self, sigma: &Permutation) -> Result<Self> {
        let full = slot_permutation_on(self.registry(), sigma)?;
        let map = factor_permutation_map(&self.registry().dims(), &full)?;
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for j in 0..d {
            for i in 0..d {
                out[(map[i], map[j])] = self.matrix()[(i, j)];
            }
        }
        LabeledOperator::new(self.registry().clone(), out)
    }
}

/// `Π X Π` for the normalized symmetric projector over `slots` slot pairs,
/// computed by index gathering. `X` may carry extra spaces (e.g. `I0`, `O0`).
pub fn symmetric_sandwich(op: &LabeledOperator, slots: usize) -> Result<LabeledOperator> {
    let dims = op.registry().dims();
    let maps = all_permutations(slots)
        .iter()
        .map(|s| factor_permutation_map(&dims, &slot_permutation_on(op.registry(), s)?))
        .collect::<Result<Vec<_>>>()?;
    let w = Complex64::new(1.0 / maps.len() as f64, 0.0);
    let d = op.dim();
    let x = op.matrix();
    // Y = X Π : Y[:, j] = avg_tau X[:, f_tau(j)]
    let mut y = CMatrix::zeros(d, d);
    for map in &maps {
        for j in 0..d {
            let src = map[j];
            for i in 0..d {
                y[(i, j)] += x[(i, src)] * w;
            }
        }
    }
    // Z = Π Y : Z[i, :] = avg_sigma Y[f_sigma(i), :]
    let mut z = CMatrix::zeros(d, d);
    for map in &maps {
        for j in 0..d {
            for i in 0..d {
                z[(i, j)] += y[(map[i], j)] * w;
            }
        }
    }
    LabeledOperator::new(op.registry().clone(), z)
}
