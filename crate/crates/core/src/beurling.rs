//! Wandering subspaces of submodules and extraction of the inner symbol that
//! generates a doubly commuting submodule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hardy::{torus_grid, DegreeWindow, HardyElement, OperatorSymbol};
use crate::linalg::{self, SparseMat, C64, ONE, ZERO};
use crate::subspace::{
    self, doubly_commuting_test, intersect, monomial_multiples_capped, projection_distance, submodule_span,
    CommutatorReport, ShiftModel, SubspaceBasis, DEFAULT_COMMUTE_TOL, DEFAULT_RANK_TOL,
};

/// Default points per torus axis for innerness sampling.
pub const DEFAULT_TORUS_GRID: usize = 8;
/// Default tolerance of [`InnerCertificate`] verdicts.
pub const DEFAULT_INNER_TOL: f64 = 1e-10;
/// Allowed projection distance between a submodule and the range of its
/// extracted symbol.
pub const RANGE_TOL: f64 = 1e-8;
/// Coefficients of extracted symbols at or below this modulus are dropped.
const COEFF_PRUNE: f64 = 1e-14;
/// RREF pivot threshold used when canonicalizing wandering bases.
const PIVOT_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct WanderingData {
    /// `S ⊖ z_i S` for each variable
    pub per_variable: Vec<SubspaceBasis>,
    /// intersection of the per-variable spaces
    pub joint: SubspaceBasis,
    /// distance between `joint` and the range of the product of the
    /// per-variable projections; small whenever `S` doubly commutes
    pub product_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InnerCertificate {
    pub gram_deviation: f64,
    pub torus_deviation_max: f64,
    pub sample_count: usize,
    pub guard_degree: u32,
    pub pass: bool,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DecompositionCertificate {
    pub gram_deviation: f64,
    pub span_residual: f64,
}

impl DecompositionCertificate {
    pub fn passes(&self, gram_tol: f64, span_tol: f64) -> bool {
        self.gram_deviation <= gram_tol && self.span_residual <= span_tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExtractOptions {
    pub commute_tol: f64,
    pub inner_tol: f64,
    pub torus_grid: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { commute_tol: DEFAULT_COMMUTE_TOL, inner_tol: DEFAULT_INNER_TOL, torus_grid: DEFAULT_TORUS_GRID }
    }
}

#[derive(Clone, Debug)]
pub struct Extraction {
    pub theta: OperatorSymbol,
    pub certificate: InnerCertificate,
    pub commutator: CommutatorReport,
    pub wandering: WanderingData,
    /// guard-window projection distance between `S` and `ran M_Θ`
    pub range_distance: f64,
}

/// `I - R_i R_i^*` in the coordinates of `S`.
fn defect_in_coords(model: &ShiftModel, m: usize, i: usize) -> SparseMat {
    let r = model.r(i);
    SparseMat::identity(m).sub(&r.matmul(&r.adjoint())).pruned(1e-15)
}

fn wandering_from_defect(s: &SubspaceBasis, defect: &SparseMat) -> Result<SubspaceBasis> {
    let (_, v) = linalg::hermitian_eigen_filtered(defect, |l| l > 0.5);
    SubspaceBasis::assemble(s.window(), s.dim_e(), s.matrix().matmul(&v).pruned(1e-15))
}

/// `S ⊖ z_i S` (zero-based `i`), the range of `I - R_i R_i^*` on `S`.
pub fn wandering_space(s: &SubspaceBasis, i: usize) -> Result<SubspaceBasis> {
    let model = ShiftModel::new(s, &[i])?;
    wandering_from_defect(s, &defect_in_coords(&model, s.dimension(), i))
}

/// All per-variable wandering spaces and their intersection.
pub fn joint_wandering(s: &SubspaceBasis) -> Result<WanderingData> {
    let n = s.window().n();
    let m = s.dimension();
    let model = ShiftModel::all(s)?;
    let defects: Vec<SparseMat> = (0..n).map(|i| defect_in_coords(&model, m, i)).collect();
    let per_variable = defects.iter().map(|d| wandering_from_defect(s, d)).collect::<Result<Vec<_>>>()?;
    let joint = if n == 1 { per_variable[0].clone() } else { intersect(&per_variable)? };

    let mut prod = SparseMat::identity(m);
    for d in &defects {
        prod = d.matmul(&prod).pruned(1e-15);
    }
    let range = linalg::column_space(&prod, DEFAULT_RANK_TOL);
    let prod_space = SubspaceBasis::assemble(s.window(), s.dim_e(), s.matrix().matmul(&range).pruned(1e-15))?;
    let product_distance = projection_distance(&joint, &prod_space)?;
    Ok(WanderingData { per_variable, joint, product_distance })
}

/// Checks `S = ⊕_k z^k W` on the guard window: the family `z^k w_j` with
/// every exponent of `z^k w_j` at most `d - 1` must be orthonormal and span
/// the guard part of `S`.
pub fn verify_wandering_decomposition(s: &SubspaceBasis, w: &SubspaceBasis) -> Result<DecompositionCertificate> {
    if s.window() != w.window() || s.dim_e() != w.dim_e() {
        return Err(Error::ShapeMismatch("wandering space and submodule live in different spaces".into()));
    }
    for j in 0..w.dimension() {
        let r = s.residual(&w.matrix().column_dense(j));
        if r > DEFAULT_RANK_TOL {
            return Err(Error::NotContained { residual: r });
        }
    }
    let cap = s.window().d().saturating_sub(1);
    let family = monomial_multiples_capped(&w.elements(), s.window(), cap)?;
    let gram_deviation =
        if family.ncols() == 0 { 0.0 } else { family.adjoint().matmul(&family).identity_deviation() };
    let span = subspace::orthonormal_column_space(s.window(), s.dim_e(), &family, DEFAULT_RANK_TOL)?;
    let guard = s.restrict_to_guard();
    let span_residual =
        (0..guard.dimension()).map(|j| span.residual(&guard.matrix().column_dense(j))).fold(0.0, f64::max);
    Ok(DecompositionCertificate { gram_deviation, span_residual })
}

/// Reduces an orthonormal basis of `W` to a canonical one: row echelon form
/// with partial pivoting, then Gram-Schmidt from the last pivot backwards so
/// every vector keeps its leading coefficient real and positive. Vectors come
/// out ordered by leading coefficient index.
pub(crate) fn canonical_basis(w: &SubspaceBasis) -> Vec<Vec<C64>> {
    let mut rows: Vec<Vec<C64>> = (0..w.dimension()).map(|j| w.matrix().column_dense(j)).collect();
    let m = rows.len();
    let len = w.ambient_dimension();
    let mut pivots = Vec::with_capacity(m);
    let mut r = 0;
    for c in 0..len {
        if r == m {
            break;
        }
        let (p, best) = (r..m).map(|p| (p, rows[p][c].norm())).fold((r, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        if best <= PIVOT_TOL {
            continue;
        }
        rows.swap(r, p);
        let inv = ONE / rows[r][c];
        for x in rows[r].iter_mut() {
            *x *= inv;
        }
        rows[r][c] = ONE;
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c] == ZERO {
                continue;
            }
            let f = row[c];
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                *x -= f * y;
            }
            row[c] = ZERO;
        }
        pivots.push(c);
        r += 1;
    }
    rows.truncate(r);
    let mut done: Vec<Vec<C64>> = Vec::with_capacity(r);
    for i in (0..r).rev() {
        let mut v = rows[i].clone();
        for _ in 0..2 {
            for u in &done {
                let dot: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(u) {
                    *x -= dot * y;
                }
            }
        }
        let phase = v[pivots[i]] / v[pivots[i]].norm();
        let scale = phase.conj() / linalg::vec_norm(&v);
        for x in v.iter_mut() {
            *x *= scale;
        }
        done.push(v);
    }
    done.reverse();
    done
}

/// Inner symbol `Θ` with `ran M_Θ = S` on the guard window, for a nonzero
/// doubly commuting submodule `S`.
pub fn extract_inner(s: &SubspaceBasis) -> Result<Extraction> {
    extract_inner_with(s, &ExtractOptions::default())
}

pub fn extract_inner_with(s: &SubspaceBasis, opts: &ExtractOptions) -> Result<Extraction> {
    if s.dimension() == 0 {
        return Err(Error::ZeroSubspace);
    }
    let commutator = doubly_commuting_test(s, opts.commute_tol)?;
    extract_after_test(s, commutator, opts)
}

/// Extraction for a subspace whose commutator report is already known.
pub(crate) fn extract_after_test(
    s: &SubspaceBasis,
    commutator: CommutatorReport,
    opts: &ExtractOptions,
) -> Result<Extraction> {
    if s.dimension() == 0 {
        return Err(Error::ZeroSubspace);
    }
    if !commutator.verdict {
        return Err(Error::NotDoublyCommuting(Box::new(commutator)));
    }
    let wandering = joint_wandering(s)?;
    if wandering.joint.dimension() > s.dim_e() {
        return Err(Error::NonBeurling { wandering: wandering.joint.dimension(), ambient: s.dim_e() });
    }
    let window = s.window();
    let columns: Vec<HardyElement> = canonical_basis(&wandering.joint)
        .into_iter()
        .map(|c| HardyElement::from_coeffs(window, s.dim_e(), c))
        .collect::<Result<_>>()?;
    let theta = OperatorSymbol::from_columns(window, s.dim_e(), &columns)?.pruned(COEFF_PRUNE).trimmed();
    let guard = window.d().saturating_sub(1);
    let certificate = innerness_certificate(&theta, guard, opts.torus_grid, opts.inner_tol)?;
    let range_distance = range_distance(s, &theta)?;
    if range_distance > RANGE_TOL {
        return Err(Error::RangeMismatch { distance: range_distance });
    }
    Ok(Extraction { theta, certificate, commutator, wandering, range_distance })
}

/// Guard-window projection distance between `S` and the submodule generated by
/// the columns of `theta` inside the window of `S`.
pub fn range_distance(s: &SubspaceBasis, theta: &OperatorSymbol) -> Result<f64> {
    let window = s.window();
    let span = if theta.cols() == 0 {
        SubspaceBasis::zero(window, s.dim_e())
    } else {
        submodule_span(&theta.with_window_degree(window.d())?.columns(), window)?
    };
    projection_distance(&s.restrict_to_guard(), &span.restrict_to_guard())
}

/// Gram deviation of `{z^k θ_j : k within the guard degree}` and the largest
/// `‖Θ(ζ)^*Θ(ζ) - I‖` over `grid^n` offset roots of unity.
pub fn innerness_certificate(
    theta: &OperatorSymbol,
    guard_degree: u32,
    grid: usize,
    tolerance: f64,
) -> Result<InnerCertificate> {
    if grid == 0 {
        return Err(Error::InvalidWindow("torus grid needs at least one point per axis".into()));
    }
    let n = theta.n();
    let points = torus_grid(n, grid);
    let sample_count = points.len();
    if theta.cols() == 0 {
        return Ok(InnerCertificate {
            gram_deviation: 0.0,
            torus_deviation_max: 0.0,
            sample_count,
            guard_degree,
            pass: true,
            tolerance,
        });
    }
    let theta = theta.trimmed();
    let out = DegreeWindow::new(n, guard_degree + theta.degree())?;
    let shifts = DegreeWindow::new(n, guard_degree)?;
    let rows = theta.rows();
    let mut cols = Vec::with_capacity(shifts.len() * theta.cols());
    let mut target = vec![0u32; n];
    for j in 0..theta.cols() {
        let entries: Vec<(Vec<u32>, usize, C64)> = theta
            .terms()
            .flat_map(|(k, m)| (0..rows).map(move |r| (k.entries().to_vec(), r, m[(r, j)])))
            .filter(|t| t.2 != ZERO)
            .collect();
        for k in shifts.multi_indices() {
            let col = entries
                .iter()
                .map(|(e, r, x)| {
                    for (t, (a, b)) in target.iter_mut().zip(k.entries().iter().zip(e)) {
                        *t = a + b;
                    }
                    (out.position_of(&target).expect("fits by construction") * rows + r, *x)
                })
                .collect();
            cols.push(col);
        }
    }
    let family = SparseMat::from_columns(out.len() * rows, cols);
    let gram_deviation = family.adjoint().matmul(&family).identity_deviation();
    let torus_deviation_max = points
        .par_iter()
        .map(|z| {
            let v = theta.evaluate(z.coords()).expect("point has n coordinates");
            let g = v.adjoint() * &v - linalg::CMat::identity(v.ncols(), v.ncols());
            linalg::dense_spectral_norm(&g)
        })
        .reduce(|| 0.0, f64::max);
    let pass = gram_deviation <= tolerance && torus_deviation_max <= tolerance;
    Ok(InnerCertificate { gram_deviation, torus_deviation_max, sample_count, guard_degree, pass, tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::MultiIndex;
    use crate::linalg::CMat;

    fn w(n: usize, d: u32) -> DegreeWindow {
        DegreeWindow::new(n, d).unwrap()
    }

    fn mono(win: &DegreeWindow, k: &[u32]) -> HardyElement {
        HardyElement::monomial(win, 1, &MultiIndex::new(k.to_vec()).unwrap(), 0).unwrap()
    }

    fn span_of(win: &DegreeWindow, ks: &[&[u32]]) -> SubspaceBasis {
        let gens: Vec<_> = ks.iter().map(|k| mono(win, k)).collect();
        subspace::orthonormalize(&gens, DEFAULT_RANK_TOL).unwrap()
    }

    #[test]
    fn wandering_of_full_space_is_constants() {
        let win = w(1, 5);
        let ws = wandering_space(&SubspaceBasis::full(&win, 1), 0).unwrap();
        assert!(projection_distance(&ws, &span_of(&win, &[&[0]])).unwrap() < 1e-12);
    }

    #[test]
    fn wandering_of_z1z2_submodule() {
        let win = w(2, 3);
        let s = submodule_span(&[mono(&win, &[1, 1])], &win).unwrap();
        let w1 = wandering_space(&s, 0).unwrap();
        let expect = span_of(&win, &[&[1, 1], &[1, 2], &[1, 3]]);
        assert!(projection_distance(&w1, &expect).unwrap() < 1e-12);
        let data = joint_wandering(&s).unwrap();
        assert!(projection_distance(&data.joint, &span_of(&win, &[&[1, 1]])).unwrap() < 1e-12);
        assert!(data.product_distance < 1e-12);
    }

    #[test]
    fn wandering_of_non_dc_submodule() {
        let win = w(2, 4);
        let s = submodule_span(&[mono(&win, &[1, 0]), mono(&win, &[0, 1])], &win).unwrap();
        let w1 = wandering_space(&s, 0).unwrap();
        let expect = span_of(&win, &[&[1, 0], &[0, 1], &[0, 2], &[0, 3], &[0, 4]]);
        assert!(projection_distance(&w1, &expect).unwrap() < 1e-12);
        let data = joint_wandering(&s).unwrap();
        assert!(projection_distance(&data.joint, &span_of(&win, &[&[1, 0], &[0, 1]])).unwrap() < 1e-12);
        let cert = verify_wandering_decomposition(&s, &data.joint).unwrap();
        assert!(cert.gram_deviation >= 0.5);
    }

    #[test]
    fn decomposition_of_simple_submodules() {
        let win = w(1, 4);
        let full = SubspaceBasis::full(&win, 1);
        let cert = verify_wandering_decomposition(&full, &span_of(&win, &[&[0]])).unwrap();
        assert_eq!((cert.gram_deviation, cert.span_residual), (0.0, 0.0));
        let win = w(2, 4);
        let s = submodule_span(&[mono(&win, &[1, 1])], &win).unwrap();
        let cert = verify_wandering_decomposition(&s, &span_of(&win, &[&[1, 1]])).unwrap();
        assert!(cert.passes(1e-12, 1e-12));
        assert!(matches!(
            verify_wandering_decomposition(&s, &span_of(&win, &[&[0, 0]])),
            Err(Error::NotContained { .. })
        ));
    }

    #[test]
    fn extract_scalar_monomial() {
        let win = w(2, 3);
        let s = submodule_span(&[mono(&win, &[1, 0])], &win).unwrap();
        let ex = extract_inner(&s).unwrap();
        assert_eq!((ex.theta.rows(), ex.theta.cols(), ex.theta.term_count()), (1, 1, 1));
        let c = ex.theta.coefficient(&MultiIndex::new(vec![1, 0]).unwrap()).unwrap();
        assert!((c[(0, 0)] - ONE).norm() < 1e-14);
        assert!(ex.certificate.pass);
    }

    #[test]
    fn extract_constant_isometry() {
        let theta0 = CMat::from_row_slice(3, 2, &[ZERO, ZERO, ONE, ZERO, ZERO, ONE]);
        let sym = OperatorSymbol::constant(3, theta0.clone()).unwrap().with_window_degree(3).unwrap();
        let win = w(3, 3);
        let s = submodule_span(&sym.columns(), &win).unwrap();
        let ex = extract_inner(&s).unwrap();
        assert_eq!(ex.theta.degree(), 0);
        let u = theta0.adjoint() * ex.theta.constant_term();
        assert!((&theta0 * &u - ex.theta.constant_term()).norm() < 1e-12);
        assert!((u.adjoint() * &u - CMat::identity(2, 2)).norm() < 1e-12);
        assert!(ex.range_distance < 1e-12);
    }

    #[test]
    fn extract_full_space_gives_unitary() {
        let win = w(2, 2);
        let ex = extract_inner(&SubspaceBasis::full(&win, 2)).unwrap();
        assert_eq!(ex.theta.degree(), 0);
        let c = ex.theta.constant_term();
        assert!((c.adjoint() * &c - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn extract_refuses_non_dc() {
        let win = w(2, 3);
        let s = submodule_span(&[mono(&win, &[1, 0]), mono(&win, &[0, 1])], &win).unwrap();
        match extract_inner(&s) {
            Err(Error::NotDoublyCommuting(rep)) => assert!(rep.max_norm() > 0.99),
            other => panic!("expected refusal, got {other:?}"),
        }
        assert!(matches!(extract_inner(&SubspaceBasis::zero(&win, 1)), Err(Error::ZeroSubspace)));
    }

    #[test]
    fn certificate_examples() {
        let theta0 = CMat::from_row_slice(3, 2, &[ZERO, ZERO, ONE, ZERO, ZERO, ONE]);
        let sym = OperatorSymbol::constant(3, theta0).unwrap();
        let c = innerness_certificate(&sym, 2, 8, DEFAULT_INNER_TOL).unwrap();
        assert_eq!((c.gram_deviation, c.torus_deviation_max, c.sample_count), (0.0, 0.0, 512));

        let win = w(2, 1);
        let mut s = OperatorSymbol::zero(&win, 1, 1);
        s.add_term(&MultiIndex::new(vec![1, 1]).unwrap(), &CMat::from_element(1, 1, ONE)).unwrap();
        let c = innerness_certificate(&s, 3, 8, DEFAULT_INNER_TOL).unwrap();
        assert!(c.pass && c.gram_deviation <= 1e-14 && c.torus_deviation_max <= 1e-14);

        let half = CMat::from_element(1, 1, C64::new(0.5, 0.0));
        let mut s = OperatorSymbol::zero(&win, 1, 1);
        s.add_term(&MultiIndex::new(vec![1, 0]).unwrap(), &half).unwrap();
        s.add_term(&MultiIndex::new(vec![0, 1]).unwrap(), &half).unwrap();
        let c = innerness_certificate(&s, 3, 8, DEFAULT_INNER_TOL).unwrap();
        assert!(!c.pass);
        assert!((c.torus_deviation_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_basis_is_basis_independent() {
        let win = w(1, 3);
        let a = span_of(&win, &[&[0], &[1]]);
        let mix = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let v1: Vec<C64> = (0..4).map(|p| if p == 0 { mix[0] } else if p == 1 { mix[1] } else { ZERO }).collect();
        let v2: Vec<C64> = (0..4).map(|p| if p == 0 { mix[1] } else if p == 1 { mix[0] } else { ZERO }).collect();
        let b = SubspaceBasis::from_orthonormal(&win, 1, SparseMat::from_dense_columns(4, &[v1, v2])).unwrap();
        let ca = canonical_basis(&a);
        let cb = canonical_basis(&b);
        for (x, y) in ca.iter().zip(&cb) {
            assert!(x.iter().zip(y).all(|(p, q)| (p - q).norm() < 1e-14));
        }
        assert!((ca[0][0] - ONE).norm() < 1e-14);
    }
}
