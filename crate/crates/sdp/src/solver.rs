//! ADMM on `min c·x  s.t.  A x = b, x ∈ K`, where `x` stacks the real
//! coordinates of every block followed by `p`, and `K` is a product of PSD
//! cones and a free line. Each iteration projects onto the affine set with a
//! cached pivoted Cholesky factor of `A Aᵀ` and onto `K` by clipping the
//! eigenvalues of each block. Both residuals are absolute: `‖x - z‖` and
//! `ρ ‖z_k - z_{k-1}‖` must fall below `tol`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use sod_core::tensor::{CMatrix, MatrixData};
use sod_core::{Error, Result};

use crate::problem::{Coefficient, Constraint, SdpProblem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Over-relaxation `α ∈ (0, 2)`.
    pub alpha: f64,
    pub rho: f64,
    /// Residual-balancing period for `ρ`; 0 keeps it fixed.
    pub adapt_every: usize,
    /// Pivots below this fraction of the largest are treated as dependent rows.
    pub rank_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 200_000, alpha: 1.5, rho: 1.0, adapt_every: 50, rank_tol: 1e-10 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    MaxIter,
    InfeasibleSuspected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpSolution {
    #[serde(with = "matrices")]
    pub blocks: Vec<CMatrix>,
    pub p: f64,
    /// Largest equality violation of the returned (PSD) blocks.
    pub primal_residual: f64,
    /// `ρ ‖z_k - z_{k-1}‖` at the last iteration.
    pub dual_residual: f64,
    /// `‖x - z‖` at the last iteration.
    pub consensus_residual: f64,
    pub iterations: usize,
    pub status: Status,
    /// Number of linearly independent constraints kept by the factorization.
    pub rank: usize,
}

mod matrices {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(blocks: &[CMatrix], s: S) -> std::result::Result<S::Ok, S::Error> {
        let data: Vec<MatrixData> = blocks.iter().map(MatrixData::from_matrix).collect();
        data.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMatrix>, D::Error> {
        let data = Vec::<MatrixData>::deserialize(d)?;
        data.iter().map(|m| m.to_matrix().map_err(serde::de::Error::custom)).collect()
    }
}

/// Real coordinates of a Hermitian `n x n` matrix: the diagonal, then
/// `√2 Re X_rc, √2 Im X_rc` for `r < c`. The map is an isometry.
struct Layout {
    offsets: Vec<usize>,
    dims: Vec<usize>,
    len: usize,
}

fn pair_index(n: usize, r: usize, c: usize) -> usize {
    r * n - r * (r + 1) / 2 + (c - r - 1)
}

impl Layout {
    fn new(prob: &SdpProblem) -> Self {
        let mut offsets = Vec::new();
        let mut len = 0;
        for b in &prob.blocks {
            offsets.push(len);
            len += b.dim * b.dim;
        }
        Self { offsets, dims: prob.blocks.iter().map(|b| b.dim).collect(), len: len + 1 }
    }

    fn p_index(&self) -> usize {
        self.len - 1
    }

    fn diag(&self, b: usize, r: usize) -> usize {
        self.offsets[b] + r
    }

    /// `(re, im)` coordinates of `X_rc`, `r < c`.
    fn off(&self, b: usize, r: usize, c: usize) -> (usize, usize) {
        let n = self.dims[b];
        let k = self.offsets[b] + n + 2 * pair_index(n, r, c);
        (k, k + 1)
    }

    fn unpack(&self, x: &DVector<f64>, b: usize) -> CMatrix {
        let n = self.dims[b];
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = CMatrix::zeros(n, n);
        for r in 0..n {
            m[(r, r)] = Complex64::new(x[self.diag(b, r)], 0.0);
            for c in r + 1..n {
                let (i, j) = self.off(b, r, c);
                let v = Complex64::new(x[i] * s, x[j] * s);
                m[(r, c)] = v;
                m[(c, r)] = v.conj();
            }
        }
        m
    }

    fn pack(&self, m: &CMatrix, b: usize, x: &mut DVector<f64>) {
        let n = self.dims[b];
        let s = std::f64::consts::SQRT_2;
        for r in 0..n {
            x[self.diag(b, r)] = m[(r, r)].re;
            for c in r + 1..n {
                // average the two triangles so slightly non-Hermitian input is symmetrized
                let v = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
                let (i, j) = self.off(b, r, c);
                x[i] = v.re * s;
                x[j] = v.im * s;
            }
        }
    }

    /// Adds the coordinates of `X -> Re(h X_cr)` to `row`.
    fn accumulate(&self, b: usize, r: usize, c: usize, h: Complex64, row: &mut BTreeMap<usize, f64>) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (i, j) = (c, r);
        if i == j {
            *row.entry(self.diag(b, i)).or_default() += h.re;
        } else if i < j {
            let (a, bi) = self.off(b, i, j);
            *row.entry(a).or_default() += h.re * s;
            *row.entry(bi).or_default() -= h.im * s;
        } else {
            let (a, bi) = self.off(b, j, i);
            *row.entry(a).or_default() += h.re * s;
            *row.entry(bi).or_default() += h.im * s;
        }
    }
}

/// Row-sparse constraint matrix, rows scaled to unit norm.
struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    ncols: usize,
}

impl SparseRows {
    fn build(prob: &SdpProblem, layout: &Layout) -> Result<Self> {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for con in &prob.constraints {
            let mut row = BTreeMap::new();
            for (b, h) in &con.terms {
                for &(r, c, v) in &h.entries {
                    layout.accumulate(*b, r, c, v, &mut row);
                }
            }
            if con.p_coeff != 0.0 {
                *row.entry(layout.p_index()).or_default() += con.p_coeff;
            }
            let entries: Vec<(usize, f64)> = row.into_iter().filter(|(_, v)| *v != 0.0).collect();
            let norm = entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                if con.rhs.abs() > 0.0 {
                    return Err(Error::Infeasible(con.rhs.abs()));
                }
                continue;
            }
            rows.push(entries.into_iter().map(|(k, v)| (k, v / norm)).collect());
            rhs.push(con.rhs / norm);
        }
        Ok(Self { rows, rhs, ncols: layout.len })
    }

    fn mul(&self, x: &DVector<f64>, sel: &[usize]) -> DVector<f64> {
        DVector::from_iterator(sel.len(), sel.iter().map(|&i| self.rows[i].iter().map(|&(k, v)| v * x[k]).sum()))
    }

    fn tr_mul(&self, y: &DVector<f64>, sel: &[usize]) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for (t, &i) in sel.iter().enumerate() {
            for &(k, v) in &self.rows[i] {
                out[k] += v * y[t];
            }
        }
        out
    }

    fn gram(&self) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.ncols];
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, v) in row {
                cols[k].push((i, v));
            }
        }
        let mut g = DMatrix::zeros(m, m);
        for col in &cols {
            for &(i, vi) in col {
                for &(j, vj) in col {
                    if j <= i {
                        g[(i, j)] += vi * vj;
                    }
                }
            }
        }
        g.fill_upper_triangle_with_lower_triangle();
        g
    }
}

/// Pivoted Cholesky of a PSD Gram matrix: returns the selected rows and the
/// lower factor `L` with `G[sel, sel] = L Lᵀ`.
fn pivoted_cholesky(g: &DMatrix<f64>, rank_tol: f64) -> (Vec<usize>, DMatrix<f64>) {
    let m = g.nrows();
    let mut diag: Vec<f64> = (0..m).map(|i| g[(i, i)]).collect();
    let max_diag = diag.iter().copied().fold(0.0, f64::max);
    let mut remaining: Vec<usize> = (0..m).collect();
    // rows[i] holds L[i, 0..k] for every original index i
    let mut l_rows: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut sel = Vec::new();
    while !remaining.is_empty() {
        let (pos, &j) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| diag[*a.1].total_cmp(&diag[*b.1]))
            .expect("non-empty");
        if diag[j] <= rank_tol * max_diag.max(f64::MIN_POSITIVE) {
            break;
        }
        remaining.swap_remove(pos);
        let pivot = diag[j].sqrt();
        let lj = l_rows[j].clone();
        let updates: Vec<(usize, f64)> = remaining
            .par_iter()
            .map(|&i| {
                let dot: f64 = l_rows[i].iter().zip(&lj).map(|(a, b)| a * b).sum();
                (i, (g[(i, j)] - dot) / pivot)
            })
            .collect();
        for (i, v) in updates {
            l_rows[i].push(v);
            diag[i] -= v * v;
        }
        l_rows[j].push(pivot);
        sel.push(j);
    }
    let r = sel.len();
    let l = DMatrix::from_fn(r, r, |a, b| if b <= a { l_rows[sel[a]][b] } else { 0.0 });
    (sel, l)
}

struct AffineProjector {
    a: SparseRows,
    sel: Vec<usize>,
    l: DMatrix<f64>,
    b_sel: DVector<f64>,
}

impl AffineProjector {
    fn new(a: SparseRows, rank_tol: f64) -> Self {
        let (sel, l) = if a.rows.is_empty() { (Vec::new(), DMatrix::zeros(0, 0)) } else { pivoted_cholesky(&a.gram(), rank_tol) };
        let b_sel = DVector::from_iterator(sel.len(), sel.iter().map(|&i| a.rhs[i]));
        Self { a, sel, l, b_sel }
    }

    /// `v - Aᵀ (A Aᵀ)^{-1} (A v - b)` over the independent rows.
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.sel.is_empty() {
            return v.clone();
        }
        let r = self.a.mul(v, &self.sel) - &self.b_sel;
        let y = self.l.solve_lower_triangular(&r).expect("nonzero pivots");
        let y = self.l.tr_solve_lower_triangular(&y).expect("nonzero pivots");
        v - self.a.tr_mul(&y, &self.sel)
    }
}

fn clip_psd(m: &CMatrix) -> CMatrix {
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return m.clone();
    }
    let mut out = m.clone();
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        if l < 0.0 {
            let v = eig.eigenvectors.column(k);
            out -= v * v.adjoint() * Complex64::new(l, 0.0);
        }
    }
    out
}

fn project_cone(layout: &Layout, v: &DVector<f64>) -> DVector<f64> {
    let mut out = v.clone();
    let clipped: Vec<CMatrix> = (0..layout.dims.len())
        .into_par_iter()
        .map(|b| if layout.dims[b] == 0 { CMatrix::zeros(0, 0) } else { clip_psd(&layout.unpack(v, b)) })
        .collect();
    for (b, m) in clipped.iter().enumerate() {
        layout.pack(m, b, &mut out);
    }
    out
}

/// Rewrites every block with a face `V` in terms of `Y`, `X = V Y V†`.
fn reduce(prob: &SdpProblem, faces: &[Option<CMatrix>]) -> SdpProblem {
    let mut out = SdpProblem::new(prob.maximize_p);
    for (b, face) in prob.blocks.iter().zip(faces) {
        out.add_block(b.name.clone(), face.as_ref().map_or(b.dim, |v| v.ncols()));
    }
    for con in &prob.constraints {
        let terms = con
            .terms
            .iter()
            .map(|(b, h)| match &faces[*b] {
                None => (*b, h.clone()),
                Some(v) => {
                    let mut dense = CMatrix::zeros(h.dim, h.dim);
                    for &(r, c, x) in &h.entries {
                        dense[(r, c)] += x;
                    }
                    (*b, Coefficient::from_matrix(&(v.adjoint() * dense * v)))
                }
            })
            .collect();
        out.constraints.push(Constraint { label: con.label.clone(), terms, p_coeff: con.p_coeff, rhs: con.rhs });
    }
    out
}

pub fn solve_sdp(prob: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    prob.validate()?;
    if !(opts.alpha > 0.0 && opts.alpha < 2.0) || opts.rho <= 0.0 || opts.tol <= 0.0 {
        return Err(Error::InvalidArgument("need 0 < alpha < 2, rho > 0 and tol > 0".into()));
    }
    let faces = prob.blocks.iter().map(|b| b.face_matrix()).collect::<Result<Vec<_>>>()?;
    let reduced = if faces.iter().any(Option::is_some) { Some(reduce(prob, &faces)) } else { None };
    let work = reduced.as_ref().unwrap_or(prob);
    let layout = Layout::new(work);
    let proj = AffineProjector::new(SparseRows::build(work, &layout)?, opts.rank_tol);
    let n = layout.len;
    let mut c = DVector::zeros(n);
    if prob.maximize_p {
        c[layout.p_index()] = -1.0;
    }

    let mut rho = opts.rho;
    let mut z = DVector::zeros(n);
    let mut u = DVector::zeros(n);
    let (mut r_prim, mut r_dual) = (f64::INFINITY, f64::INFINITY);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let x = proj.project(&(&z - &u - &c / rho));
        let x_hat = &x * opts.alpha + &z * (1.0 - opts.alpha);
        let z_new = project_cone(&layout, &(&x_hat + &u));
        u += &x_hat - &z_new;
        r_prim = (&x - &z_new).norm();
        r_dual = rho * (&z_new - &z).norm();
        z = z_new;

        if r_prim <= opts.tol && r_dual <= opts.tol {
            converged = true;
            break;
        }
        if opts.adapt_every > 0 && iterations % opts.adapt_every == 0 {
            let scale = if r_prim > 10.0 * r_dual {
                2.0
            } else if r_dual > 10.0 * r_prim {
                0.5
            } else {
                1.0
            };
            rho *= scale;
            u /= scale;
        }
    }

    let blocks: Vec<CMatrix> = (0..layout.dims.len())
        .map(|b| {
            let y = layout.unpack(&z, b);
            match &faces[b] {
                Some(v) => v * y * v.adjoint(),
                None => y,
            }
        })
        .collect();
    let p = z[layout.p_index()];
    let primal_residual = prob.max_violation(&blocks, p);
    let status = if converged {
        Status::Optimal
    } else if r_prim > opts.tol.sqrt() {
        Status::InfeasibleSuspected
    } else {
        Status::MaxIter
    };
    Ok(SdpSolution {
        blocks,
        p,
        primal_residual,
        dual_residual: r_dual,
        consensus_residual: r_prim,
        iterations,
        status,
        rank: proj.sel.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Coefficient, Constraint};

    fn one(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn layout_round_trip_is_isometric() {
        let mut p = SdpProblem::new(false);
        p.add_block("A", 3);
        p.add_block("B", 2);
        let layout = Layout::new(&p);
        assert_eq!(layout.len, 9 + 4 + 1);
        let m = CMatrix::from_fn(3, 3, |r, c| Complex64::new((r + c) as f64, r as f64 - c as f64));
        let mut x = DVector::zeros(layout.len);
        layout.pack(&m, 0, &mut x);
        assert!((layout.unpack(&x, 0) - &m).norm() < 1e-14);
        assert!((x.norm() - m.norm()).abs() < 1e-12);
    }

    #[test]
    fn rows_match_trace_functional() {
        let mut p = SdpProblem::new(false);
        p.add_block("A", 3);
        let h = CMatrix::from_fn(3, 3, |r, c| Complex64::new((r * 3 + c) as f64, (r as f64) - (c as f64)));
        let h = &h + h.adjoint();
        p.add_constraint(Constraint { label: "h".into(), terms: vec![(0, Coefficient::from_matrix(&h))], p_coeff: 0.0, rhs: 0.0 });
        let layout = Layout::new(&p);
        let rows = SparseRows::build(&p, &layout).unwrap();
        let x_m = CMatrix::from_fn(3, 3, |r, c| Complex64::new(1.0 / (1 + r + c) as f64, (c as f64 - r as f64) * 0.3));
        let mut x = DVector::zeros(layout.len);
        layout.pack(&x_m, 0, &mut x);
        let scale = {
            let mut probe = DVector::zeros(layout.len);
            layout.pack(&h, 0, &mut probe);
            probe.norm()
        };
        let got = rows.mul(&x, &[0])[0] * scale;
        assert!((got - (&h * &x_m).trace().re).abs() < 1e-12);
    }

    #[test]
    fn pivoted_cholesky_drops_dependent_rows() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let g = &a * a.transpose();
        let (sel, l) = pivoted_cholesky(&g, 1e-12);
        assert_eq!(sel.len(), 2);
        let sub = DMatrix::from_fn(2, 2, |i, j| g[(sel[i], sel[j])]);
        assert!((&l * l.transpose() - sub).norm() < 1e-12);
    }

    /// max t s.t. [[1, t], [t, 1]] ⪰ 0
    #[test]
    fn two_by_two_boundary() {
        let mut p = SdpProblem::new(true);
        p.add_block("X", 2);
        let e = |r, c, v| Coefficient::entry(2, r, c, v);
        p.add_constraint(Constraint { label: "x00".into(), terms: vec![(0, e(0, 0, one(1.0)))], p_coeff: 0.0, rhs: 1.0 });
        p.add_constraint(Constraint { label: "x11".into(), terms: vec![(0, e(1, 1, one(1.0)))], p_coeff: 0.0, rhs: 1.0 });
        // Re X01 - t = 0 and Im X01 = 0
        p.add_constraint(Constraint { label: "re".into(), terms: vec![(0, e(1, 0, one(1.0)))], p_coeff: -1.0, rhs: 0.0 });
        p.add_constraint(Constraint {
            label: "im".into(),
            terms: vec![(0, e(1, 0, Complex64::new(0.0, -1.0)))],
            p_coeff: 0.0,
            rhs: 0.0,
        });
        let sol = solve_sdp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.p - 1.0).abs() < 1e-6, "t = {}", sol.p);
        assert!(sol.primal_residual < 1e-5);
    }

    #[test]
    fn deterministic() {
        let mut p = SdpProblem::new(true);
        p.add_block("X", 2);
        p.add_constraint(Constraint { label: "tr".into(), terms: vec![(0, Coefficient::from_matrix(&CMatrix::identity(2, 2)))], p_coeff: 0.0, rhs: 1.0 });
        p.add_constraint(Constraint { label: "p".into(), terms: vec![(0, Coefficient::entry(2, 0, 0, one(1.0)))], p_coeff: -1.0, rhs: 0.0 });
        let a = solve_sdp(&p, &SolverOptions::default()).unwrap();
        let b = solve_sdp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
        assert!((a.p - 1.0).abs() < 1e-5);
    }

    #[test]
    fn contradictory_constraints_do_not_converge() {
        let mut p = SdpProblem::new(false);
        p.add_block("X", 1);
        // X = -1 with X ⪰ 0
        p.add_constraint(Constraint { label: "neg".into(), terms: vec![(0, Coefficient::entry(1, 0, 0, one(1.0)))], p_coeff: 0.0, rhs: -1.0 });
        let sol = solve_sdp(&p, &SolverOptions { max_iter: 2000, ..Default::default() }).unwrap();
        assert_eq!(sol.status, Status::InfeasibleSuspected);
    }

    /// The same boundary problem with `X` confined to `span{(1, 1)}`.
    #[test]
    fn face_restriction() {
        let mut p = SdpProblem::new(true);
        let b = p.add_block("X", 2);
        p.add_constraint(Constraint {
            label: "tr".into(),
            terms: vec![(0, Coefficient::from_matrix(&CMatrix::identity(2, 2)))],
            p_coeff: 0.0,
            rhs: 2.0,
        });
        p.add_constraint(Constraint { label: "re".into(), terms: vec![(0, Coefficient::entry(2, 1, 0, one(1.0)))], p_coeff: -1.0, rhs: 0.0 });
        let s = std::f64::consts::FRAC_1_SQRT_2;
        p.set_face(b, &CMatrix::from_column_slice(2, 1, &[one(s), one(s)]));
        let sol = solve_sdp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.p - 1.0).abs() < 1e-6);
        assert_eq!(sol.blocks[0].nrows(), 2);
        assert!((sol.blocks[0][(0, 1)] - one(1.0)).norm() < 1e-6);
    }

    #[test]
    fn bad_options_rejected() {
        let p = SdpProblem::new(false);
        assert!(solve_sdp(&p, &SolverOptions { alpha: 2.0, ..Default::default() }).is_err());
    }
}
