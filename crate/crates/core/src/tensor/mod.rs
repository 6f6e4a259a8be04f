//! Dense operators on labeled tensor-product spaces.
//!
//! Every operator carries a [`SpaceRegistry`]: an ordered list of named
//! subsystems. Flat indices are row-major over that list, the last-listed
//! space varying fastest, so `|x_0, ..., x_{n-1}>` sits at
//! `sum_k x_k * prod_{l>k} dim_l`.

mod basis;
pub(crate) mod perm;
mod serial;
mod spectral;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use basis::{antisymmetric_state, antisymmetric_vector, hermitian_basis, HermBasis};
pub use perm::{
    all_permutations, permutation_operator, slot_pair_labels, symmetric_projector,
    symmetric_sandwich, Permutation,
};
pub use serial::{MatrixData, OperatorData};
pub use spectral::{eigh, is_psd, min_eigenvalue, min_eigenvalue_on_support, range_basis};

pub type CMatrix = DMatrix<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub(crate) fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Space {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of uniquely labeled subsystems.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SpaceRegistry {
    spaces: Vec<Space>,
}

impl SpaceRegistry {
    pub fn new<L: Into<String>>(spaces: impl IntoIterator<Item = (L, usize)>) -> Result<Self> {
        let spaces: Vec<Space> = spaces
            .into_iter()
            .map(|(label, dim)| Space { label: label.into(), dim })
            .collect();
        Self::from_spaces(spaces)
    }

    pub fn from_spaces(spaces: Vec<Space>) -> Result<Self> {
        for (k, s) in spaces.iter().enumerate() {
            if s.dim == 0 {
                return Err(Error::InvalidArgument(format!("space `{}` has dimension 0", s.label)));
            }
            if spaces[..k].iter().any(|t| t.label == s.label) {
                return Err(Error::LabelCollision(s.label.clone()));
            }
        }
        Ok(Self { spaces })
    }

    /// The empty registry; operators on it are 1x1 scalars.
    pub fn scalar() -> Self {
        Self::default()
    }

    pub fn spaces(&self) -> &[Space] {
        &self.spaces
    }

    pub fn len(&self) -> usize {
        self.spaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spaces.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.spaces.iter().map(|s| s.label.as_str())
    }

    pub fn dims(&self) -> Vec<usize> {
        self.spaces.iter().map(|s| s.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.spaces.iter().map(|s| s.dim).product()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.spaces.iter().position(|s| s.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        self.position(label)
            .map(|k| self.spaces[k].dim)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn concat(&self, other: &SpaceRegistry) -> Result<Self> {
        let mut spaces = self.spaces.clone();
        spaces.extend(other.spaces.iter().cloned());
        Self::from_spaces(spaces)
    }

    /// Sub-registry in the order the labels are given.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let spaces = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                self.position(l)
                    .map(|k| self.spaces[k].clone())
                    .ok_or_else(|| Error::UnknownLabel(l.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_spaces(spaces)
    }

    /// Registry with the given labels removed, original order kept.
    pub fn without<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        for l in labels {
            if !self.contains(l.as_ref()) {
                return Err(Error::UnknownLabel(l.as_ref().to_string()));
            }
        }
        Ok(Self {
            spaces: self
                .spaces
                .iter()
                .filter(|s| !labels.iter().any(|l| l.as_ref() == s.label))
                .cloned()
                .collect(),
        })
    }

    fn same_label_set(&self, other: &SpaceRegistry) -> bool {
        self.len() == other.len()
            && other
                .spaces
                .iter()
                .all(|s| self.position(&s.label).map(|k| self.spaces[k].dim) == Some(s.dim))
    }
}

/// For a registry with `dims`, reordered so that new position `k` holds old
/// space `order[k]`, returns the map `old flat index -> new flat index`.
pub(crate) fn relabel_map(dims: &[usize], order: &[usize]) -> Vec<usize> {
    let n = dims.len();
    let total: usize = dims.iter().product();
    let mut new_stride_of_old = vec![0usize; n];
    let mut stride = 1;
    for k in (0..n).rev() {
        new_stride_of_old[order[k]] = stride;
        stride *= dims[order[k]];
    }
    let mut map = Vec::with_capacity(total);
    let mut digits = vec![0usize; n];
    let mut value = 0usize;
    for _ in 0..total {
        map.push(value);
        // odometer over old digits, last fastest
        for k in (0..n).rev() {
            digits[k] += 1;
            value += new_stride_of_old[k];
            if digits[k] < dims[k] {
                break;
            }
            value -= digits[k] * new_stride_of_old[k];
            digits[k] = 0;
        }
    }
    map
}

/// Dense complex matrix on an ordered tensor product of named subsystems.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledOperator {
    registry: SpaceRegistry,
    matrix: CMatrix,
}

impl LabeledOperator {
    pub fn new(registry: SpaceRegistry, matrix: CMatrix) -> Result<Self> {
        let d = registry.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but registry has total dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { registry, matrix })
    }

    /// Convenience constructor from `(label, dim)` pairs.
    pub fn on<L: Into<String>>(
        spaces: impl IntoIterator<Item = (L, usize)>,
        matrix: CMatrix,
    ) -> Result<Self> {
        Self::new(SpaceRegistry::new(spaces)?, matrix)
    }

    pub fn identity(registry: SpaceRegistry) -> Self {
        let d = registry.total_dim();
        Self { registry, matrix: CMatrix::identity(d, d) }
    }

    pub fn zeros(registry: SpaceRegistry) -> Self {
        let d = registry.total_dim();
        Self { registry, matrix: CMatrix::zeros(d, d) }
    }

    pub fn scalar(value: Complex64) -> Self {
        Self { registry: SpaceRegistry::scalar(), matrix: CMatrix::from_element(1, 1, value) }
    }

    pub fn registry(&self) -> &SpaceRegistry {
        &self.registry
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut CMatrix {
        &mut self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { registry: self.registry.clone(), matrix: &self.matrix * c(factor) }
    }

    pub fn scaled_complex(&self, factor: Complex64) -> Self {
        Self { registry: self.registry.clone(), matrix: &self.matrix * factor }
    }

    pub fn adjoint(&self) -> Self {
        Self { registry: self.registry.clone(), matrix: self.matrix.adjoint() }
    }

    /// Frobenius norm of `A - A^dagger`.
    pub fn hermitian_residual(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_residual() <= tol * self.frobenius_norm().max(1.0)
    }

    /// `(A + A^dagger) / 2`
    pub fn hermitian_part(&self) -> Self {
        Self {
            registry: self.registry.clone(),
            matrix: (&self.matrix + self.matrix.adjoint()) * c(0.5),
        }
    }

    /// The same operator with its spaces listed in `labels` order.
    pub fn reorder<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let target = self.registry.select(labels)?;
        if target.len() != self.registry.len() {
            return Err(Error::InvalidArgument(format!(
                "reorder needs all {} labels, got {}",
                self.registry.len(),
                target.len()
            )));
        }
        self.aligned_to(&target)
    }

    /// Reorders spaces to match `target`, which must hold the same labels and dims.
    pub fn aligned_to(&self, target: &SpaceRegistry) -> Result<Self> {
        if !self.registry.same_label_set(target) {
            return Err(Error::DimensionMismatch(format!(
                "cannot align {:?} to {:?}",
                self.registry.labels().collect::<Vec<_>>(),
                target.labels().collect::<Vec<_>>()
            )));
        }
        if &self.registry == target {
            return Ok(self.clone());
        }
        let order: Vec<usize> =
            target.labels().map(|l| self.registry.position(l).unwrap()).collect();
        let map = relabel_map(&self.registry.dims(), &order);
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for col in 0..d {
            let nc = map[col];
            for row in 0..d {
                out[(map[row], nc)] = self.matrix[(row, col)];
            }
        }
        Ok(Self { registry: target.clone(), matrix: out })
    }

    fn check_same(&self, other: &Self) -> Result<Self> {
        other.aligned_to(&self.registry)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let o = self.check_same(other)?;
        Ok(Self { registry: self.registry.clone(), matrix: &self.matrix + o.matrix })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        let o = self.check_same(other)?;
        Ok(Self { registry: self.registry.clone(), matrix: &self.matrix - o.matrix })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        let o = self.check_same(other)?;
        Ok(Self { registry: self.registry.clone(), matrix: &self.matrix * o.matrix })
    }

    /// Frobenius norm of `self - other` after aligning spaces.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        let o = self.check_same(other)?;
        Ok((&self.matrix - o.matrix).norm())
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        tensor_product(self, other)
    }

    pub fn partial_trace<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        partial_trace(self, labels)
    }

    pub fn partial_transpose<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        partial_transpose(self, labels)
    }

    pub fn transpose(&self) -> Self {
        Self { registry: self.registry.clone(), matrix: self.matrix.transpose() }
    }

    /// `self ⊗ I` on the spaces of `target` missing from `self`, in `target` order.
    pub fn embed(&self, target: &SpaceRegistry) -> Result<Self> {
        let mut out = Self::zeros(target.clone());
        out.add_embedded(self, 1.0)?;
        Ok(out)
    }

    /// `self += factor * (op ⊗ I_rest)` without materialising the identity.
    pub fn add_embedded(&mut self, op: &Self, factor: f64) -> Result<()> {
        self.add_embedded_complex(op, c(factor))
    }

    pub fn add_embedded_complex(&mut self, op: &Self, factor: Complex64) -> Result<()> {
        for s in op.registry.spaces() {
            if self.registry.dim_of(&s.label)? != s.dim {
                return Err(Error::DimensionMismatch(format!(
                    "space `{}` has dim {} in the operator but {} in the target",
                    s.label,
                    s.dim,
                    self.registry.dim_of(&s.label)?
                )));
            }
        }
        let rest = self.registry.without(&op.registry.labels().collect::<Vec<_>>())?;
        // order[k]: position in self of the k-th space of (op spaces..., rest...)
        let order: Vec<usize> = op
            .registry
            .labels()
            .chain(rest.labels())
            .map(|l| self.registry.position(l).unwrap())
            .collect();
        let mut inv = vec![0usize; order.len()];
        for (k, &o) in order.iter().enumerate() {
            inv[o] = k;
        }
        let mut combined_dims = op.registry.dims();
        combined_dims.extend(rest.dims());
        let map = relabel_map(&combined_dims, &inv);
        let r = rest.total_dim();
        let dop = op.dim();
        for j in 0..dop {
            for i in 0..dop {
                let v = op.matrix[(i, j)];
                if v == ZERO {
                    continue;
                }
                let v = v * factor;
                for t in 0..r {
                    self.matrix[(map[i * r + t], map[j * r + t])] += v;
                }
            }
        }
        Ok(())
    }

    /// `Tr_L[self (I ⊗ other)]` where `L` are the spaces of `other`.
    ///
    /// This is the link product used for comb application and channel action;
    /// callers transpose `other` themselves where the convention requires it.
    pub fn contract(&self, other: &Self) -> Result<Self> {
        let other_labels: Vec<&str> = other.registry.labels().collect();
        let rest = self.registry.without(&other_labels)?;
        let full = rest.concat(&other.registry)?;
        let m = self.aligned_to(&full)?;
        let da = rest.total_dim();
        let dl = other.dim();
        let mut out = CMatrix::zeros(da, da);
        for b in 0..da {
            for a in 0..da {
                let mut acc = ZERO;
                for cc in 0..dl {
                    let col = b * dl + cc;
                    for r in 0..dl {
                        acc += m.matrix[(a * dl + r, col)] * other.matrix[(cc, r)];
                    }
                }
                out[(a, b)] = acc;
            }
        }
        Self::new(rest, out)
    }
}

pub fn tensor_product(a: &LabeledOperator, b: &LabeledOperator) -> Result<LabeledOperator> {
    let registry = a.registry.concat(&b.registry)?;
    Ok(LabeledOperator { registry, matrix: a.matrix.kronecker(&b.matrix) })
}

/// Tensor product of a list of operators, left to right.
pub fn tensor_all(ops: &[LabeledOperator]) -> Result<LabeledOperator> {
    let mut acc = LabeledOperator::scalar(ONE);
    for op in ops {
        acc = tensor_product(&acc, op)?;
    }
    Ok(acc)
}

pub fn partial_trace<S: AsRef<str>>(a: &LabeledOperator, labels: &[S]) -> Result<LabeledOperator> {
    let kept = a.registry.without(labels)?;
    let traced = a.registry.select(labels)?;
    let m = a.aligned_to(&kept.concat(&traced)?)?;
    let dk = kept.total_dim();
    let dt = traced.total_dim();
    let mut out = CMatrix::zeros(dk, dk);
    for j in 0..dk {
        for i in 0..dk {
            let mut acc = ZERO;
            for t in 0..dt {
                acc += m.matrix[(i * dt + t, j * dt + t)];
            }
            out[(i, j)] = acc;
        }
    }
    LabeledOperator::new(kept, out)
}

pub fn partial_transpose<S: AsRef<str>>(
    a: &LabeledOperator,
    labels: &[S],
) -> Result<LabeledOperator> {
    let rest = a.registry.without(labels)?;
    let sel = a.registry.select(labels)?;
    let m = a.aligned_to(&rest.concat(&sel)?)?;
    let dr = rest.total_dim();
    let ds = sel.total_dim();
    let d = dr * ds;
    let mut out = CMatrix::zeros(d, d);
    for ca in 0..dr {
        for cs in 0..ds {
            for ra in 0..dr {
                for rs in 0..ds {
                    out[(ra * ds + cs, ca * ds + rs)] = m.matrix[(ra * ds + rs, ca * ds + cs)];
                }
            }
        }
    }
    LabeledOperator::new(m.registry, out)?.aligned_to(&a.registry)
}
