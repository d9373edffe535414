//! Closed subspaces of the truncated Hardy space and the operator identities
//! that characterize submodules.
//!
//! A [`SubspaceBasis`] holds an orthonormal set of coefficient vectors. All
//! operator identities involving shifts are checked on the *guard window*:
//! inputs whose exponents are all at most `d - 1`. There `M_{z_i}` never leaves
//! the window and the backward shift is exact, so a failure is a property of
//! the subspace and not of the truncation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardy::{shift_matrix, DegreeWindow, HardyElement, MultiIndex};
use crate::linalg::{self, vec_norm, CMat, SparseMat, C64, ONE};
use crate::wire::SymbolWire;

/// Relative singular value cutoff for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Orthonormality tolerance for constructed bases.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Residual allowed when checking that a shifted vector stays in a subspace.
pub const INVARIANCE_TOL: f64 = 1e-10;
/// Default verdict threshold of [`doubly_commuting_test`].
pub const DEFAULT_COMMUTE_TOL: f64 = 1e-8;

/// Entries below this modulus are dropped from intermediate operator products;
/// they only come from cancellation and would otherwise glue blocks together.
const FILL_TOL: f64 = 1e-15;

/// Orthonormal basis of a subspace of `H^2_{C^dim}` restricted to a window.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    window: DegreeWindow,
    dim: usize,
    columns: SparseMat,
}

impl SubspaceBasis {
    /// Wraps columns that are already orthonormal (checked to 1e-10).
    pub fn from_orthonormal(window: &DegreeWindow, dim: usize, columns: SparseMat) -> Result<Self> {
        let s = Self::assemble(window, dim, columns)?;
        let dev = s.gram_deviation();
        if dev > ORTHONORMAL_TOL {
            return Err(Error::ShapeMismatch(format!("columns are not orthonormal (Gram deviation {dev:e})")));
        }
        Ok(s)
    }

    pub(crate) fn assemble(window: &DegreeWindow, dim: usize, columns: SparseMat) -> Result<Self> {
        if columns.nrows() != window.len() * dim {
            return Err(Error::ShapeMismatch(format!(
                "columns have length {}, ambient dimension is {}",
                columns.nrows(),
                window.len() * dim
            )));
        }
        if columns.ncols() > columns.nrows() {
            return Err(Error::ShapeMismatch("more basis vectors than the ambient dimension".into()));
        }
        Ok(Self { window: window.clone(), dim, columns })
    }

    pub fn zero(window: &DegreeWindow, dim: usize) -> Self {
        Self { window: window.clone(), dim, columns: SparseMat::zeros(window.len() * dim, 0) }
    }

    /// The whole truncated space, spanned by the monomial basis.
    pub fn full(window: &DegreeWindow, dim: usize) -> Self {
        Self { window: window.clone(), dim, columns: SparseMat::identity(window.len() * dim) }
    }

    pub fn window(&self) -> &DegreeWindow {
        &self.window
    }

    /// Dimension of the coefficient space `E`.
    pub fn dim_e(&self) -> usize {
        self.dim
    }

    /// Number of basis vectors.
    pub fn dimension(&self) -> usize {
        self.columns.ncols()
    }

    pub fn ambient_dimension(&self) -> usize {
        self.columns.nrows()
    }

    pub fn matrix(&self) -> &SparseMat {
        &self.columns
    }

    pub fn element(&self, j: usize) -> HardyElement {
        HardyElement::from_coeffs(&self.window, self.dim, self.columns.column_dense(j)).expect("shape checked")
    }

    pub fn elements(&self) -> Vec<HardyElement> {
        (0..self.dimension()).map(|j| self.element(j)).collect()
    }

    pub fn gram_deviation(&self) -> f64 {
        if self.dimension() == 0 {
            return 0.0;
        }
        self.columns.adjoint().matmul(&self.columns).identity_deviation()
    }

    pub fn project_coeffs(&self, v: &[C64]) -> Vec<C64> {
        self.columns.mul_vec(&self.columns.adjoint_mul_vec(v))
    }

    /// Distance from `v` to the subspace.
    pub fn residual(&self, v: &[C64]) -> f64 {
        let p = self.project_coeffs(v);
        v.iter().zip(&p).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_element(&self, f: &HardyElement) -> Result<()> {
        if f.window() != &self.window || f.dim() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "element in {:?} x C^{}, subspace in {:?} x C^{}",
                f.window(),
                f.dim(),
                self.window,
                self.dim
            )));
        }
        Ok(())
    }

    pub fn contains(&self, f: &HardyElement, tol: f64) -> Result<bool> {
        self.check_element(f)?;
        Ok(self.residual(f.coeffs()) <= tol * f.norm().max(1.0))
    }

    /// `P_S = Q Q^*` as a sparse ambient matrix.
    pub fn projector(&self) -> SparseMat {
        self.columns.matmul(&self.columns.adjoint())
    }

    pub fn orthogonal_complement(&self) -> SubspaceBasis {
        let ns = linalg::null_space_abs(&self.columns.adjoint(), 0.5);
        Self { window: self.window.clone(), dim: self.dim, columns: ns }
    }

    /// Mask of ambient coordinates inside the guard window.
    fn guard_rows(&self) -> Vec<bool> {
        self.window.guard_mask().into_iter().flat_map(|g| std::iter::repeat_n(g, self.dim)).collect()
    }

    /// Coordinates (in this basis) of an orthonormal basis of the vectors of
    /// the subspace supported on the guard window.
    pub(crate) fn guard_coordinates(&self) -> SparseMat {
        let outside: Vec<bool> = self.guard_rows().into_iter().map(|g| !g).collect();
        let q_out = self.columns.select_rows(&outside);
        linalg::null_space_abs(&q_out, INVARIANCE_TOL)
    }

    /// The part of the subspace supported on the guard window.
    pub fn restrict_to_guard(&self) -> SubspaceBasis {
        let c = self.guard_coordinates();
        Self { window: self.window.clone(), dim: self.dim, columns: self.columns.matmul(&c).pruned(FILL_TOL) }
    }
}

/// Orthonormal basis of the span of `generators`, which must share one space.
/// An empty list is rejected because the ambient window would be unknown; use
/// [`orthonormalize_in`] to get the zero subspace.
pub fn orthonormalize(generators: &[HardyElement], rank_tol: f64) -> Result<SubspaceBasis> {
    let first = generators.first().ok_or(Error::EmptyGenerators)?;
    orthonormalize_in(&first.window().clone(), first.dim(), generators, rank_tol)
}

/// [`orthonormalize`] with an explicit ambient space; no generators gives the
/// zero subspace.
pub fn orthonormalize_in(
    window: &DegreeWindow,
    dim: usize,
    generators: &[HardyElement],
    rank_tol: f64,
) -> Result<SubspaceBasis> {
    let mut cols = Vec::with_capacity(generators.len());
    for g in generators {
        if g.window() != window || g.dim() != dim {
            return Err(Error::ShapeMismatch("generators live in different spaces".into()));
        }
        cols.push(g.to_sparse_column());
    }
    let gen = SparseMat::from_columns(window.len() * dim, cols);
    orthonormal_column_space(window, dim, &gen, rank_tol)
}

pub(crate) fn orthonormal_column_space(
    window: &DegreeWindow,
    dim: usize,
    gen: &SparseMat,
    rank_tol: f64,
) -> Result<SubspaceBasis> {
    if rank_tol <= 0.0 {
        return Err(Error::ShapeMismatch("rank tolerance must be positive".into()));
    }
    SubspaceBasis::assemble(window, dim, linalg::column_space(gen, rank_tol))
}

/// Per-variable degree vector of an element.
fn degree_vector(f: &HardyElement) -> Vec<u32> {
    let mut deg = vec![0u32; f.window().n()];
    for (p, k) in f.window().multi_indices().iter().enumerate() {
        if f.coeffs()[p * f.dim()..(p + 1) * f.dim()].iter().any(|c| c.norm() > 0.0) {
            for (d, &e) in deg.iter_mut().zip(k.entries()) {
                *d = (*d).max(e);
            }
        }
    }
    deg
}

/// Columns `z^k g` for every generator `g` and every `k` with `k + deg(g)`
/// inside the window, as a sparse matrix over the window's monomial basis.
pub(crate) fn monomial_multiples(generators: &[HardyElement], window: &DegreeWindow) -> Result<SparseMat> {
    monomial_multiples_capped(generators, window, window.d())
}

/// As [`monomial_multiples`] but only exponents with `k + deg(g) <= cap` per
/// variable; generators above `cap` contribute nothing.
pub(crate) fn monomial_multiples_capped(generators: &[HardyElement], window: &DegreeWindow, cap: u32) -> Result<SparseMat> {
    let dim = generators.first().map(HardyElement::dim).unwrap_or(1);
    let mut cols = Vec::new();
    let mut target = vec![0u32; window.n()];
    for g in generators {
        if g.window().n() != window.n() || g.dim() != dim {
            return Err(Error::ShapeMismatch("generators live in different spaces".into()));
        }
        if g.degree() > window.d() {
            return Err(Error::DegreeExceedsWindow { degree: g.degree(), window: window.d() });
        }
        let deg = degree_vector(g);
        if deg.iter().any(|&e| e > cap) {
            continue;
        }
        let support: Vec<(&MultiIndex, &[C64])> = g
            .window()
            .multi_indices()
            .iter()
            .enumerate()
            .map(|(p, k)| (k, &g.coeffs()[p * dim..(p + 1) * dim]))
            .filter(|(_, c)| c.iter().any(|x| x.norm() > 0.0))
            .collect();
        for k in window.multi_indices() {
            if k.entries().iter().zip(&deg).any(|(a, b)| a + b > cap) {
                continue;
            }
            let mut col = Vec::with_capacity(support.len() * dim);
            for (m, c) in &support {
                for (t, (a, b)) in target.iter_mut().zip(k.entries().iter().zip(m.entries())) {
                    *t = a + b;
                }
                let q = window.position_of(&target).expect("degree checked");
                col.extend(c.iter().enumerate().map(|(j, x)| (q * dim + j, *x)));
            }
            cols.push(col);
        }
    }
    Ok(SparseMat::from_columns(window.len() * dim, cols))
}

/// The submodule generated by `generators`, truncated to `window`: the span of
/// `z^k g` over generators `g` and exponents with `k + deg(g)` in the window.
pub fn submodule_span(generators: &[HardyElement], window: &DegreeWindow) -> Result<SubspaceBasis> {
    let Some(first) = generators.first() else {
        return Err(Error::EmptyGenerators);
    };
    let dim = first.dim();
    let gen = monomial_multiples(generators, window)?;
    let mut s = orthonormal_column_space(window, dim, &gen, DEFAULT_RANK_TOL)?;
    // A combination of generators can have lower degree than its parts, and
    // then its shifts fit in the window although no single z^k g does. Add
    // them until every shift that fits stays inside.
    let tops: Vec<Vec<bool>> = (0..window.n())
        .map(|i| {
            window
                .multi_indices()
                .iter()
                .flat_map(|k| std::iter::repeat_n(k.entries()[i] == window.d(), dim))
                .collect()
        })
        .collect();
    loop {
        let q = &s.columns;
        let mut extra = Vec::new();
        for (i, top) in tops.iter().enumerate() {
            let below = q.matmul(&linalg::null_space_abs(&q.select_rows(top), INVARIANCE_TOL));
            let moved = shift_matrix(window, dim, i)?.matmul(&below);
            let resid = moved.sub(&q.matmul(&q.adjoint().matmul(&moved)));
            extra.extend((0..moved.ncols()).filter(|&j| resid.col_norm(j) > DEFAULT_RANK_TOL).map(|j| moved.col(j).to_vec()));
        }
        if extra.is_empty() {
            return Ok(s);
        }
        let grown = q.hcat(&SparseMat::from_columns(q.nrows(), extra));
        let next = orthonormal_column_space(window, dim, &grown, DEFAULT_RANK_TOL)?;
        if next.dimension() <= s.dimension() {
            return Ok(s);
        }
        s = next;
    }
}

/// Orthogonal projection of `f` onto `S`.
pub fn project(s: &SubspaceBasis, f: &HardyElement) -> Result<HardyElement> {
    s.check_element(f)?;
    HardyElement::from_coeffs(&s.window, s.dim, s.project_coeffs(f.coeffs()))
}

/// Intersection of subspaces of one ambient space, read off the eigenvectors of
/// the averaged projection `sum P_i / m` whose eigenvalue is within `1e-8` of 1.
pub fn intersect(bases: &[SubspaceBasis]) -> Result<SubspaceBasis> {
    intersect_with_tol(bases, DEFAULT_RANK_TOL)
}

pub fn intersect_with_tol(bases: &[SubspaceBasis], tol: f64) -> Result<SubspaceBasis> {
    let first = bases.first().ok_or(Error::EmptyGenerators)?;
    for b in bases {
        if b.window != first.window || b.dim != first.dim {
            return Err(Error::ShapeMismatch("intersecting subspaces of different spaces".into()));
        }
    }
    if bases.iter().any(|b| b.dimension() == 0) {
        return Ok(SubspaceBasis::zero(&first.window, first.dim));
    }
    let weight = C64::new(1.0 / bases.len() as f64, 0.0);
    let mut avg = SparseMat::zeros(first.ambient_dimension(), first.ambient_dimension());
    for b in bases {
        avg = avg.lin_comb(ONE, &b.projector(), weight);
    }
    let (_, vecs) = linalg::hermitian_eigen_filtered(&avg.pruned(FILL_TOL), |l| l >= 1.0 - tol);
    SubspaceBasis::assemble(&first.window, first.dim, vecs.pruned(FILL_TOL))
}

/// Largest singular value of `P_A - P_B`: the sine of the largest principal
/// angle when the dimensions agree, and 1 when they differ.
pub fn projection_distance(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<f64> {
    if a.window != b.window || a.dim != b.dim {
        return Err(Error::ShapeMismatch("comparing subspaces of different spaces".into()));
    }
    let diff = a.projector().sub(&b.projector()).pruned(FILL_TOL);
    Ok(linalg::spectral_norm(&diff))
}

/// Compressed shifts of a subspace, with the guard basis they are checked on.
pub(crate) struct ShiftModel {
    /// orthonormal guard vectors, in coordinates of `s`
    pub guard: SparseMat,
    /// `R_i = P_S M_{z_i}|_S` in coordinates of `s`, indexed by direction
    pub r: Vec<Option<SparseMat>>,
}

impl ShiftModel {
    /// Builds `R_i` for the requested directions, verifying on the guard window
    /// that each shift maps the subspace into itself.
    pub fn new(s: &SubspaceBasis, directions: &[usize]) -> Result<Self> {
        let n = s.window.n();
        let guard = s.guard_coordinates();
        let q = &s.columns;
        let qh = q.adjoint();
        let guard_amb = q.matmul(&guard);
        let mut r = vec![None; n];
        for &i in directions {
            if i >= n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            let shift = shift_matrix(&s.window, s.dim, i)?;
            let moved = shift.matmul(&guard_amb);
            let back = q.matmul(&qh.matmul(&moved));
            let resid = moved.sub(&back);
            let worst = (0..resid.ncols()).map(|j| resid.col_norm(j)).fold(0.0, f64::max);
            if worst > INVARIANCE_TOL {
                return Err(Error::NotSubmodule { direction: i, residual: worst });
            }
            r[i] = Some(qh.matmul(&shift.matmul(q)).pruned(FILL_TOL));
        }
        Ok(Self { guard, r })
    }

    pub fn all(s: &SubspaceBasis) -> Result<Self> {
        let dirs: Vec<usize> = (0..s.window.n()).collect();
        Self::new(s, &dirs)
    }

    pub fn r(&self, i: usize) -> &SparseMat {
        self.r[i].as_ref().expect("direction was requested")
    }
}

/// Matrix of `P_S M_{z_i}|_S` in the basis of `S` (zero-based `i`), after
/// checking on the guard window that `S` is invariant under `M_{z_i}`.
pub fn compress_shift(s: &SubspaceBasis, i: usize) -> Result<SparseMat> {
    let model = ShiftModel::new(s, &[i])?;
    Ok(model.r(i).clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairNorm {
    /// one-based variable labels, `i < j`
    pub i: usize,
    pub j: usize,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorWitness {
    pub i: usize,
    pub j: usize,
    /// unit guard-window vector of `S` attaining the pair norm
    pub vector: SymbolWire,
}

/// Outcome of the double-commutation check on a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CommutatorReport {
    pub pair_norms: Vec<PairNorm>,
    pub guard_degree: u32,
    pub tolerance: f64,
    pub verdict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<CommutatorWitness>,
}

impl CommutatorReport {
    pub fn max_norm(&self) -> f64 {
        self.pair_norms.iter().map(|p| p.norm).fold(0.0, f64::max)
    }
}

/// Norms of `R_i R_j^* - R_j^* R_i` restricted to the guard window, for all
/// pairs `i < j`; the verdict holds when every norm is at most `tolerance`.
pub fn doubly_commuting_test(s: &SubspaceBasis, tolerance: f64) -> Result<CommutatorReport> {
    let n = s.window.n();
    let guard_degree = s.window.d().saturating_sub(1);
    let model = ShiftModel::all(s)?;
    let mut pair_norms = Vec::with_capacity(n * (n - 1) / 2);
    // largest pair so far: (norm, i, j, witness coordinates)
    let mut worst = None;
    let adj: Vec<SparseMat> = (0..n).map(|i| model.r(i).adjoint()).collect();
    for i in 0..n {
        let ri_c = model.r(i).matmul(&model.guard);
        for (j, rjh) in adj.iter().enumerate().skip(i + 1) {
            let rjh_c = rjh.matmul(&model.guard);
            let k = model.r(i).matmul(&rjh_c).sub(&rjh.matmul(&ri_c)).pruned(FILL_TOL);
            let (norm, wit) = linalg::spectral_norm_with_witness(&k);
            pair_norms.push(PairNorm { i: i + 1, j: j + 1, norm });
            if worst.as_ref().is_none_or(|w: &(f64, usize, usize, Vec<(usize, C64)>)| norm > w.0) {
                worst = Some((norm, i, j, wit));
            }
        }
    }
    let verdict = pair_norms.iter().all(|p| p.norm <= tolerance);
    let witness = match worst {
        Some((norm, i, j, wit)) if norm > tolerance => {
            let coords = SparseMat::from_columns(model.guard.ncols(), vec![wit]);
            let amb = s.columns.matmul(&model.guard.matmul(&coords)).column_dense(0);
            let e = HardyElement::from_coeffs(&s.window, s.dim, clean_phase(amb))?;
            Some(CommutatorWitness { i: i + 1, j: j + 1, vector: SymbolWire::from_element(&e) })
        }
        _ => None,
    };
    Ok(CommutatorReport { pair_norms, guard_degree, tolerance, verdict, witness })
}

/// Rotates a vector so its largest entry is real positive and drops noise.
fn clean_phase(mut v: Vec<C64>) -> Vec<C64> {
    if let Some(big) = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
        if big.norm() > 0.0 {
            let phase = big.conj() / big.norm();
            for x in v.iter_mut() {
                *x *= phase;
                if x.norm() <= FILL_TOL {
                    *x = C64::new(0.0, 0.0);
                }
            }
        }
    }
    v
}

/// Result of [`reducing_test`].
#[derive(Clone, Debug, PartialEq)]
pub enum ReducingOutcome {
    /// `S = H^2_{E_*}` on the window; orthonormal basis of `E_* ⊆ C^dim`.
    Reducing { constants: Vec<Vec<C64>> },
    /// A guard vector of `S` whose image under `M_{z_i}` (or its adjoint)
    /// leaves `S`. `direction` is `None` when both invariances hold but `S` is
    /// still not of the form `H^2_{E_*}` on the window.
    NotReducing { direction: Option<usize>, adjoint: bool, vector: HardyElement, residual: f64 },
}

impl ReducingOutcome {
    pub fn is_reducing(&self) -> bool {
        matches!(self, ReducingOutcome::Reducing { .. })
    }
}

/// Checks invariance of `S` under every `M_{z_i}` and `M_{z_i}^*` on the guard
/// window. Reducing subspaces are exactly `H^2_{E_*}` with `E_*` the constant
/// elements of `S`.
pub fn reducing_test(s: &SubspaceBasis) -> Result<ReducingOutcome> {
    let n = s.window.n();
    let guard = s.columns.matmul(&s.guard_coordinates());
    for i in 0..n {
        let fwd = shift_matrix(&s.window, s.dim, i)?;
        for (adjoint, op) in [(false, fwd.clone()), (true, fwd.adjoint())] {
            let moved = op.matmul(&guard);
            let mut worst = (0.0, usize::MAX);
            for j in 0..moved.ncols() {
                let r = s.residual(&moved.column_dense(j));
                if r > worst.0 + INVARIANCE_TOL {
                    worst = (r, j);
                }
            }
            if worst.0 > INVARIANCE_TOL {
                let vector = HardyElement::from_coeffs(&s.window, s.dim, clean_phase(guard.column_dense(worst.1)))?;
                return Ok(ReducingOutcome::NotReducing { direction: Some(i), adjoint, vector, residual: worst.0 });
            }
        }
    }
    // constant elements of S
    let nonconst: Vec<bool> = (0..s.ambient_dimension()).map(|r| r >= s.dim).collect();
    let coords = linalg::null_space_abs(&s.columns.select_rows(&nonconst), INVARIANCE_TOL);
    let consts = s.columns.matmul(&coords);
    let constants: Vec<Vec<C64>> = (0..consts.ncols()).map(|j| consts.column_dense(j)[..s.dim].to_vec()).collect();
    // S must equal H^2_{E_*}: same dimension and every basis vector inside it
    let mut h2 = Vec::new();
    for p in 0..s.window.len() {
        for e in &constants {
            h2.push(e.iter().enumerate().map(|(j, x)| (p * s.dim + j, *x)).collect());
        }
    }
    let h2 = SubspaceBasis::assemble(&s.window, s.dim, SparseMat::from_columns(s.ambient_dimension(), h2))?;
    if h2.dimension() != s.dimension() {
        let (j, r) = (0..s.dimension())
            .map(|j| (j, h2.residual(&s.columns.column_dense(j))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((0, 1.0));
        let vector = if s.dimension() > 0 { s.element(j) } else { HardyElement::zero(&s.window, s.dim) };
        return Ok(ReducingOutcome::NotReducing { direction: None, adjoint: false, vector, residual: r });
    }
    Ok(ReducingOutcome::Reducing { constants })
}

/// Alternating sum `sum_{F ⊆ {1..n}} (-1)^{|F|} M_z^F M_z^{*F}` on the window,
/// adjoints applied first. Equals the projection onto constant functions.
pub fn defect_projection(window: &DegreeWindow, dim: usize) -> Result<CMat> {
    if window.d() < 1 {
        return Err(Error::WindowTooSmall { window: window.d(), required: 1 });
    }
    let n = window.n();
    let size = window.len() * dim;
    let shifts: Vec<SparseMat> = (0..n).map(|i| shift_matrix(window, dim, i)).collect::<Result<_>>()?;
    let adjoints: Vec<SparseMat> = shifts.iter().map(SparseMat::adjoint).collect();
    let mut total = SparseMat::identity(size);
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let mut term = SparseMat::identity(size);
        // M_{i1} .. M_{il} M*_{i1} .. M*_{il}; rightmost factor acts first
        for &i in members.iter().rev() {
            term = adjoints[i].matmul(&term);
        }
        for &i in members.iter().rev() {
            term = shifts[i].matmul(&term);
        }
        let sign = if members.len().is_multiple_of(2) { ONE } else { -ONE };
        total = total.lin_comb(ONE, &term, sign);
    }
    Ok(total.to_dense())
}

/// Norm of a coefficient vector; re-exported for tests.
pub fn coeff_norm(v: &[C64]) -> f64 {
    vec_norm(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::{monomial_basis, OperatorSymbol};
    use crate::linalg::ZERO;

    fn w(n: usize, d: u32) -> DegreeWindow {
        DegreeWindow::new(n, d).unwrap()
    }

    fn mono(win: &DegreeWindow, k: &[u32]) -> HardyElement {
        HardyElement::monomial(win, 1, &MultiIndex::new(k.to_vec()).unwrap(), 0).unwrap()
    }

    #[test]
    fn orthonormalize_examples() {
        let win = w(2, 2);
        let z1 = mono(&win, &[1, 0]);
        let s = orthonormalize(&[z1.clone(), z1.scaled(C64::new(2.0, 0.0))], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(s.dimension(), 1);
        assert!(s.contains(&z1, 1e-12).unwrap());
        let s = orthonormalize(&[mono(&win, &[0, 0]), z1], DEFAULT_RANK_TOL).unwrap();
        assert_eq!(s.dimension(), 2);
        let full = orthonormalize(&monomial_basis(&win, 2), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(full.dimension(), 18);
        assert!(full.gram_deviation() < 1e-14);
        assert!(matches!(orthonormalize(&[], 1e-8), Err(Error::EmptyGenerators)));
        assert_eq!(orthonormalize_in(&win, 1, &[], 1e-8).unwrap().dimension(), 0);
    }

    #[test]
    fn submodule_span_examples() {
        let win = w(2, 2);
        assert_eq!(submodule_span(&[mono(&win, &[0, 0])], &win).unwrap().dimension(), 9);
        let s = submodule_span(&[mono(&win, &[1, 1])], &win).unwrap();
        assert_eq!(s.dimension(), 4);
        for k in [[1, 1], [2, 1], [1, 2], [2, 2]] {
            assert!(s.contains(&mono(&win, &k), 1e-12).unwrap());
        }
        let s = submodule_span(&[mono(&win, &[1, 0]), mono(&win, &[0, 1])], &win).unwrap();
        assert_eq!(s.dimension(), 8);
        assert!(!s.contains(&mono(&win, &[0, 0]), 1e-6).unwrap());
        let big = mono(&w(2, 3), &[3, 0]);
        assert!(matches!(submodule_span(&[big], &win), Err(Error::DegreeExceedsWindow { .. })));
    }

    #[test]
    fn projection_examples() {
        let win = w(2, 2);
        let s = submodule_span(&[mono(&win, &[1, 0])], &win).unwrap();
        let z1z2 = mono(&win, &[1, 1]);
        assert!(project(&s, &z1z2).unwrap().max_abs_diff(&z1z2).unwrap() < 1e-12);
        assert!(project(&s, &mono(&win, &[0, 2])).unwrap().norm() < 1e-14);
        let coeffs: Vec<C64> = (0..9).map(|i| C64::new(i as f64 * 0.3 - 1.0, (i as f64).cos())).collect();
        let f = HardyElement::from_coeffs(&win, 1, coeffs).unwrap();
        let pf = project(&s, &f).unwrap();
        let rest = f.sub(&pf).unwrap();
        assert!((f.norm_sqr() - pf.norm_sqr() - rest.norm_sqr()).abs() < 1e-12);
        let ppf = project(&s, &pf).unwrap();
        assert!(ppf.max_abs_diff(&pf).unwrap() < 1e-14);
    }

    #[test]
    fn intersect_examples() {
        let win = w(2, 3);
        let a = submodule_span(&[mono(&win, &[1, 0])], &win).unwrap();
        let b = submodule_span(&[mono(&win, &[0, 1])], &win).unwrap();
        assert!(projection_distance(&intersect(&[a.clone(), a.clone()]).unwrap(), &a).unwrap() < 1e-8);
        let both = intersect(&[a.clone(), b.clone()]).unwrap();
        let expect = submodule_span(&[mono(&win, &[1, 1])], &win).unwrap();
        assert!(projection_distance(&both, &expect).unwrap() < 1e-8);
        let none = intersect(&[a.clone(), a.orthogonal_complement()]).unwrap();
        assert_eq!(none.dimension(), 0);
        let ba = intersect(&[b, a]).unwrap();
        assert!(projection_distance(&ba, &both).unwrap() < 1e-8);
    }

    #[test]
    fn compress_shift_full_space_is_jordan_block() {
        let win = w(1, 3);
        let full = SubspaceBasis::full(&win, 1);
        let r = compress_shift(&full, 0).unwrap().to_dense();
        let mut jordan = CMat::zeros(4, 4);
        for i in 0..3 {
            jordan[(i + 1, i)] = ONE;
        }
        assert_eq!(r, jordan);
    }

    #[test]
    fn compress_shift_on_principal_submodule() {
        let win = w(2, 3);
        let s = submodule_span(&[mono(&win, &[1, 0])], &win).unwrap();
        let r = compress_shift(&s, 0).unwrap();
        let z1 = mono(&win, &[1, 0]);
        let coords = s.matrix().adjoint_mul_vec(z1.coeffs());
        let out = s.matrix().mul_vec(&r.mul_vec(&coords));
        let z1sq = mono(&win, &[2, 0]);
        assert!(out.iter().zip(z1sq.coeffs()).all(|(a, b)| (a - b).norm() < 1e-12));
        // isometric on the guard window
        let model = ShiftModel::new(&s, &[0, 1]).unwrap();
        for i in 0..2 {
            let img = model.r(i).matmul(&model.guard);
            for j in 0..img.ncols() {
                assert!((img.col_norm(j) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_invariant_subspace_is_rejected() {
        let win = w(1, 3);
        let s = orthonormalize(&[mono(&win, &[1])], DEFAULT_RANK_TOL).unwrap();
        assert!(matches!(compress_shift(&s, 0), Err(Error::NotSubmodule { direction: 0, .. })));
    }

    #[test]
    fn doubly_commuting_examples() {
        let win = w(2, 3);
        let s = submodule_span(&[mono(&win, &[1, 0]), mono(&win, &[0, 1])], &win).unwrap();
        let rep = doubly_commuting_test(&s, DEFAULT_COMMUTE_TOL).unwrap();
        assert!(!rep.verdict);
        assert_eq!(rep.pair_norms.len(), 1);
        assert!((rep.pair_norms[0].norm - 1.0).abs() < 1e-12);
        let wit = rep.witness.unwrap().vector.to_element().unwrap().resized(3).unwrap();
        assert!(wit.max_abs_diff(&mono(&win, &[0, 1])).unwrap() < 1e-12);

        let s = submodule_span(&[mono(&win, &[1, 1])], &win).unwrap();
        let rep = doubly_commuting_test(&s, DEFAULT_COMMUTE_TOL).unwrap();
        assert!(rep.verdict && rep.max_norm() < 1e-12);
    }

    #[test]
    fn example_theta_range_doubly_commutes() {
        let theta = CMat::from_row_slice(3, 2, &[ZERO, ZERO, ONE, ZERO, ZERO, ONE]);
        let theta = OperatorSymbol::constant(3, theta).unwrap();
        let win = w(3, 2);
        let s = submodule_span(&theta.with_window_degree(2).unwrap().columns(), &win).unwrap();
        let rep = doubly_commuting_test(&s, DEFAULT_COMMUTE_TOL).unwrap();
        assert_eq!(rep.pair_norms.len(), 3);
        assert!(rep.verdict && rep.max_norm() <= 1e-12);
        assert_eq!(rep.guard_degree, 1);
    }

    #[test]
    fn reducing_examples() {
        let win = w(2, 2);
        let e1 = HardyElement::constant(&win, &[ONE, ZERO]);
        let s = submodule_span(&[e1], &win).unwrap();
        match reducing_test(&s).unwrap() {
            ReducingOutcome::Reducing { constants } => {
                assert_eq!(constants.len(), 1);
                assert!((constants[0][0].norm() - 1.0).abs() < 1e-12 && constants[0][1].norm() < 1e-12);
            }
            other => panic!("expected reducing, got {other:?}"),
        }
        let s = submodule_span(&[mono(&win, &[1, 0])], &win).unwrap();
        match reducing_test(&s).unwrap() {
            ReducingOutcome::NotReducing { direction, adjoint, vector, residual } => {
                assert_eq!(direction, Some(0));
                assert!(adjoint);
                assert!((residual - 1.0).abs() < 1e-12);
                assert!(vector.max_abs_diff(&mono(&win, &[1, 0])).unwrap() < 1e-12);
            }
            other => panic!("expected failure, got {other:?}"),
        }
        match reducing_test(&SubspaceBasis::full(&win, 2)).unwrap() {
            ReducingOutcome::Reducing { constants } => assert_eq!(constants.len(), 2),
            other => panic!("expected reducing, got {other:?}"),
        }
    }

    #[test]
    fn defect_projection_examples() {
        let d = defect_projection(&w(1, 2), 1).unwrap();
        let mut expect = CMat::zeros(3, 3);
        expect[(0, 0)] = ONE;
        assert_eq!(d, expect);
        let d = defect_projection(&w(2, 2), 1).unwrap();
        assert!((d.trace() - ONE).norm() < 1e-15);
        assert_eq!(d.rank(1e-10), 1);
        assert!(matches!(defect_projection(&w(2, 0), 1), Err(Error::WindowTooSmall { .. })));
    }

    #[test]
    fn defect_projection_on_kernel_returns_eta() {
        let win = w(2, 4);
        let eta = [C64::new(0.5, -1.0), C64::new(0.0, 2.0)];
        let kern = crate::hardy::cauchy_kernel_element(&[C64::new(0.3, 0.2), C64::new(-0.5, 0.1)], &eta, &win).unwrap();
        let d = defect_projection(&win, 2).unwrap();
        let out = &d * nalgebra::DVector::from_column_slice(kern.coeffs());
        let expect = HardyElement::constant(&win, &eta);
        let err = out.iter().zip(expect.coeffs()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-14);
    }

    #[test]
    fn span_keeps_shifts_of_low_degree_combinations() {
        // columns (z, 1)/√2 and (z, -1)/√2 differ by the constant √2 e2, so
        // z^3 e2 belongs to the window-3 submodule though no z^k g reaches it
        let win = w(1, 3);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut theta = OperatorSymbol::zero(&win, 2, 2);
        theta.add_term(&MultiIndex::unit(1, 0), &CMat::from_row_slice(2, 2, &[h.into(), h.into(), ZERO, ZERO])).unwrap();
        theta.add_term(&MultiIndex::zero(1), &CMat::from_row_slice(2, 2, &[ZERO, ZERO, h.into(), (-h).into()])).unwrap();
        let s = submodule_span(&theta.columns(), &win).unwrap();
        let top = HardyElement::monomial(&win, 2, &MultiIndex::new(vec![3]).unwrap(), 1).unwrap();
        assert!(s.contains(&top, 1e-10).unwrap());
        assert_eq!(s.dimension(), 7);
        assert!(doubly_commuting_test(&s, 1e-8).unwrap().verdict);
    }
}
