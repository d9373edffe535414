//! Weak completion of a left-invertible analytic column `f` with left inverse
//! `g` to a square symbol `F = [f | Θ]` with analytic inverse `Ω = [g ; Γ]`.
//!
//! All products are taken in the ring of polynomials modulo `z_i^{d+1}`, the
//! arithmetic of the computation window. Truncated Taylor data for
//! transcendental symbols satisfies `g f = I` in that ring exactly, while the
//! untruncated polynomial product would carry tail errors above degree `d`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beurling::{self, innerness_certificate, ExtractOptions, InnerCertificate};
use crate::error::{Error, Result};
use crate::hardy::{
    assemble_mult_matrix, assemble_truncated_mult_matrix, torus_grid, DegreeWindow, HardyElement, OperatorSymbol,
};
use crate::linalg::{self, CMat, SparseMat, C64};
use crate::subspace::{doubly_commuting_test, CommutatorReport, SubspaceBasis};
use crate::wire::{symbol_serde, SymbolWire, WindowWire};

/// Relative singular value cutoff of [`mult_kernel`].
pub const KERNEL_TOL: f64 = 1e-10;
pub const DEFAULT_RANK_SAMPLES: usize = 64;
/// Sampling radius of [`local_rank`].
pub const RANK_RADIUS: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Tolerances {
    /// coefficient and torus residuals of `gf - I`, `FΩ - I`, `ΩF - I`,
    /// the `Γ` solve and the inner certificate
    pub residual: f64,
    /// relative singular value cutoff for ranks
    pub rank: f64,
    /// commutator norm threshold
    pub commute: f64,
    /// projection distance between the kernel and `ran M_Θ`
    pub range: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual: 1e-10, rank: 1e-8, commute: 1e-8, range: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionProblem {
    pub f: OperatorSymbol,
    pub g: OperatorSymbol,
    pub window: DegreeWindow,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub torus_grid: usize,
    pub rank_samples: usize,
}

impl CompletionProblem {
    /// Checks shapes and that the window holds both symbols.
    pub fn new(f: OperatorSymbol, g: OperatorSymbol, window: DegreeWindow) -> Result<Self> {
        let n = window.n();
        if f.n() != n || g.n() != n {
            return Err(Error::ShapeMismatch(format!(
                "f has {} variables, g {}, window {}",
                f.n(),
                g.n(),
                n
            )));
        }
        if g.cols() != f.rows() || g.rows() != f.cols() {
            return Err(Error::ShapeMismatch(format!(
                "g is {}x{} but f is {}x{}; g f must be square",
                g.rows(),
                g.cols(),
                f.rows(),
                f.cols()
            )));
        }
        if f.cols() > f.rows() {
            return Err(Error::ShapeMismatch(format!("dim E = {} exceeds dim E_c = {}", f.cols(), f.rows())));
        }
        let required = f.degree().max(g.degree()).max(1);
        if window.d() < required {
            return Err(Error::WindowTooSmall { window: window.d(), required });
        }
        Ok(Self {
            f: f.with_window_degree(window.d())?,
            g: g.with_window_degree(window.d())?,
            window,
            tolerances: Tolerances::default(),
            seed: 1,
            torus_grid: beurling::DEFAULT_TORUS_GRID,
            rank_samples: DEFAULT_RANK_SAMPLES,
        })
    }

    pub fn dim_e(&self) -> usize {
        self.f.cols()
    }

    pub fn dim_ec(&self) -> usize {
        self.f.rows()
    }
}

/// Problem file layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProblemWire {
    pub n: usize,
    #[serde(rename = "dimE")]
    pub dim_e: usize,
    #[serde(rename = "dimEc")]
    pub dim_ec: usize,
    pub f: SymbolWire,
    pub g: SymbolWire,
    pub window: WindowWire,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    1
}

impl ProblemWire {
    pub fn to_problem(&self) -> Result<CompletionProblem> {
        if self.window.n.is_some_and(|n| n != self.n) {
            return Err(Error::Format("window.n disagrees with n".into()));
        }
        let f = self.f.to_symbol()?;
        let g = self.g.to_symbol()?;
        if f.n() != self.n || f.rows() != self.dim_ec || f.cols() != self.dim_e {
            return Err(Error::Format(format!("f must be a {}x{} symbol in {} variables", self.dim_ec, self.dim_e, self.n)));
        }
        let mut p = CompletionProblem::new(f, g, DegreeWindow::new(self.n, self.window.d)?)?;
        p.tolerances = self.tolerances;
        p.seed = self.seed;
        Ok(p)
    }

    pub fn from_problem(p: &CompletionProblem) -> Self {
        ProblemWire {
            n: p.window.n(),
            dim_e: p.dim_e(),
            dim_ec: p.dim_ec(),
            f: SymbolWire::from(&p.f.trimmed()),
            g: SymbolWire::from(&p.g.trimmed()),
            window: WindowWire { n: None, d: p.window.d() },
            tolerances: p.tolerances,
            seed: p.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RankReport {
    pub rank: usize,
    /// `[re, im]` per coordinate
    pub witness_point: Vec<[f64; 2]>,
    pub singular_values: Vec<f64>,
    pub sample_count: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimCheck {
    #[serde(rename = "dimEa")]
    pub dim_ea: usize,
    #[serde(rename = "rankG")]
    pub rank_g: usize,
    #[serde(rename = "dimEc")]
    pub dim_ec: usize,
    pub satisfied: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Residuals {
    pub left_inverse_coeff: f64,
    pub left_inverse_torus: f64,
    pub f_omega_coeff: f64,
    pub f_omega_torus: f64,
    pub omega_f_coeff: f64,
    pub omega_f_torus: f64,
    pub gamma_solve: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub f_omega_coeff: f64,
    pub f_omega_torus: f64,
    pub omega_f_coeff: f64,
    pub omega_f_torus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<InnerCertificate>,
    pub sample_count: usize,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompletionResult {
    #[serde(with = "symbol_serde")]
    pub theta: OperatorSymbol,
    #[serde(rename = "F", with = "symbol_serde")]
    pub f_full: OperatorSymbol,
    #[serde(rename = "Omega", with = "symbol_serde")]
    pub omega: OperatorSymbol,
    #[serde(rename = "Gamma", with = "symbol_serde")]
    pub gamma: OperatorSymbol,
    pub inner_cert: InnerCertificate,
    pub residuals: Residuals,
    pub dim_check: DimCheck,
    pub rank: RankReport,
    pub commutator: CommutatorReport,
    pub kernel_dimension: usize,
    /// guard-window projection distance between `ker M_g` and `ran M_Θ`
    pub kernel_range_distance: f64,
    pub tolerances: Tolerances,
    pub success: bool,
}

/// Failure of one pipeline stage; each variant carries the stage's report.
#[derive(Debug, Error)]
pub enum CompletionError {
    #[error("stage 1 (left inverse): g f - I has coefficient deviation {deviation:e} > {tolerance:e}")]
    LeftInverse { deviation: f64, tolerance: f64 },

    #[error("stage 2 (kernel): {0}")]
    Kernel(Error),

    #[error("stage 3 (double commutation): ker M_g is not doubly commuting (max pair norm {:e})", .0.max_norm())]
    NotDoublyCommuting(Box<CommutatorReport>),

    #[error("stage 4 (inner extraction): {0}")]
    Extraction(Error),

    #[error(
        "stage 5 (rank count): dim E_a + rank g = {} + {} != dim E_c = {}; window too small or kernel not Beurling",
        .check.dim_ea, .check.rank_g, .check.dim_ec
    )]
    RankNullity { check: DimCheck, rank: RankReport },

    #[error("stage 7 (Gamma solve): {0}")]
    Gamma(Error),
}

impl CompletionError {
    pub fn stage(&self) -> (u8, &'static str) {
        match self {
            CompletionError::LeftInverse { .. } => (1, "left-inverse"),
            CompletionError::Kernel(_) => (2, "kernel"),
            CompletionError::NotDoublyCommuting(_) => (3, "doubly-commuting"),
            CompletionError::Extraction(_) => (4, "extract-inner"),
            CompletionError::RankNullity { .. } => (5, "rank-nullity"),
            CompletionError::Gamma(_) => (7, "gamma-solve"),
        }
    }
}

/// `ker M_g` on the window: the exact null space of the multiplication matrix
/// into the full product window.
pub fn mult_kernel(g: &OperatorSymbol, window: &DegreeWindow) -> Result<SubspaceBasis> {
    if g.n() != window.n() {
        return Err(Error::ShapeMismatch(format!("symbol has {} variables, window {}", g.n(), window.n())));
    }
    let m = assemble_mult_matrix(&g.trimmed(), window)?;
    SubspaceBasis::assemble(window, g.cols(), linalg::null_space(&m, KERNEL_TOL).pruned(1e-15))
}

/// Largest numerical rank of `g(z)` over `samples` seeded points uniform in
/// the polydisc of radius 0.9.
pub fn local_rank(g: &OperatorSymbol, samples: usize, seed: u64) -> Result<RankReport> {
    local_rank_with_tol(g, samples, seed, Tolerances::default().rank)
}

pub fn local_rank_with_tol(g: &OperatorSymbol, samples: usize, seed: u64, rel_tol: f64) -> Result<RankReport> {
    if samples == 0 {
        return Err(Error::InvalidWindow("local rank needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(usize, Vec<C64>, Vec<f64>)> = None;
    for _ in 0..samples {
        let z: Vec<C64> = (0..g.n())
            .map(|_| {
                let r = RANK_RADIUS * rng.random::<f64>().sqrt();
                C64::from_polar(r, std::f64::consts::TAU * rng.random::<f64>())
            })
            .collect();
        let mut sv: Vec<f64> = g.evaluate(&z)?.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        let top = sv.first().copied().unwrap_or(0.0);
        let rank = if top > 0.0 { sv.iter().filter(|&&s| s > rel_tol * top).count() } else { 0 };
        if best.as_ref().is_none_or(|b| rank > b.0) {
            best = Some((rank, z, sv));
        }
    }
    let (rank, z, singular_values) = best.expect("at least one sample");
    Ok(RankReport {
        rank,
        witness_point: z.iter().map(|c| [c.re, c.im]).collect(),
        singular_values,
        sample_count: samples,
        seed,
    })
}

/// `dim E_a + rank g = dim E_c` with `dim E_a = Θ.cols`.
pub fn check_rank_nullity(g: &OperatorSymbol, theta: &OperatorSymbol, rank: &RankReport) -> DimCheck {
    let dim_ea = theta.cols();
    let dim_ec = g.cols();
    DimCheck { dim_ea, rank_g: rank.rank, dim_ec, satisfied: dim_ea + rank.rank == dim_ec }
}

/// Least-squares `Γ` with `Θ Γ = I - f g` in the window ring; returns the
/// largest column residual alongside.
pub fn solve_gamma(
    theta: &OperatorSymbol,
    f: &OperatorSymbol,
    g: &OperatorSymbol,
    window: &DegreeWindow,
) -> Result<(OperatorSymbol, f64)> {
    let d = window.d();
    let dim_ec = f.rows();
    if theta.rows() != dim_ec || g.cols() != dim_ec {
        return Err(Error::ShapeMismatch("Θ, f and g do not share E_c".into()));
    }
    let fg = f.mul_truncated(g, d)?;
    let rhs = OperatorSymbol::identity(window.n(), dim_ec)?.with_window_degree(d)?.sub(&fg)?;
    let cols: Vec<Vec<(usize, C64)>> =
        rhs.columns().iter().map(HardyElement::to_sparse_column).collect();
    let b = SparseMat::from_columns(window.len() * dim_ec, cols);
    if theta.cols() == 0 {
        let residual = (0..b.ncols()).map(|j| b.col_norm(j)).fold(0.0, f64::max);
        return Ok((OperatorSymbol::zero(window, 0, dim_ec), residual));
    }
    let a = assemble_truncated_mult_matrix(&theta.trimmed(), window)?;
    let (x, res) = linalg::least_squares(&a, &b, KERNEL_TOL);
    let gamma_cols = (0..x.ncols())
        .map(|j| HardyElement::from_coeffs(window, theta.cols(), x.column_dense(j)))
        .collect::<Result<Vec<_>>>()?;
    let gamma = OperatorSymbol::from_columns(window, theta.cols(), &gamma_cols)?;
    Ok((gamma, res.into_iter().fold(0.0, f64::max)))
}

/// Max over `grid^n` torus samples of `‖P(ζ) - I‖`.
pub fn torus_identity_deviation(p: &OperatorSymbol, grid: usize) -> Result<f64> {
    if p.rows() != p.cols() {
        return Err(Error::ShapeMismatch("identity deviation needs a square symbol".into()));
    }
    let points = torus_grid(p.n(), grid);
    let size = p.rows();
    Ok(points
        .par_iter()
        .map(|z| {
            let v = p.evaluate(z.coords()).expect("point has n coordinates") - CMat::identity(size, size);
            linalg::dense_spectral_norm(&v)
        })
        .reduce(|| 0.0, f64::max))
}

/// Residuals of `FΩ - I` and `ΩF - I` in the window ring, by coefficients and
/// on torus samples, and the inner certificate of the columns of `F` after
/// `split` when a split is given.
pub fn verify_completion(
    f_full: &OperatorSymbol,
    omega: &OperatorSymbol,
    window: &DegreeWindow,
    grid: usize,
    split: Option<usize>,
    tolerance: f64,
) -> Result<VerificationReport> {
    if f_full.rows() != f_full.cols() || omega.rows() != omega.cols() || f_full.rows() != omega.rows() {
        return Err(Error::ShapeMismatch("F and Ω must be square of equal size".into()));
    }
    if f_full.n() != window.n() || omega.n() != window.n() {
        return Err(Error::ShapeMismatch("F, Ω and the window disagree on the number of variables".into()));
    }
    if grid == 0 {
        return Err(Error::InvalidWindow("torus grid needs at least one point per axis".into()));
    }
    let d = window.d();
    let fo = f_full.mul_truncated(omega, d)?;
    let of = omega.mul_truncated(f_full, d)?;
    let inner = match split {
        Some(s) if s <= f_full.cols() => {
            let tail = f_full.column_range(s, f_full.cols())?;
            Some(innerness_certificate(&tail, d.saturating_sub(1), grid, tolerance)?)
        }
        Some(s) => return Err(Error::ShapeMismatch(format!("split {s} beyond {} columns", f_full.cols()))),
        None => None,
    };
    let f_omega_coeff = fo.identity_deviation()?;
    let f_omega_torus = torus_identity_deviation(&fo, grid)?;
    let omega_f_coeff = of.identity_deviation()?;
    let omega_f_torus = torus_identity_deviation(&of, grid)?;
    let pass = [f_omega_coeff, f_omega_torus, omega_f_coeff, omega_f_torus].iter().all(|&x| x <= tolerance)
        && inner.as_ref().is_none_or(|c| c.pass);
    Ok(VerificationReport {
        f_omega_coeff,
        f_omega_torus,
        omega_f_coeff,
        omega_f_torus,
        inner,
        sample_count: grid.pow(window.n() as u32),
        tolerance,
        pass,
    })
}

/// Runs the completion pipeline. Stage failures are errors; a completed run
/// whose final residuals exceed tolerance returns with `success = false`.
pub fn complete(problem: &CompletionProblem) -> std::result::Result<CompletionResult, CompletionError> {
    let window = &problem.window;
    let d = window.d();
    let tol = problem.tolerances;
    let (f, g) = (&problem.f, &problem.g);

    // 1. g f = I
    let gf = g.mul_truncated(f, d).map_err(CompletionError::Kernel)?;
    let left_inverse_coeff = gf.identity_deviation().map_err(CompletionError::Kernel)?;
    if left_inverse_coeff > tol.residual {
        return Err(CompletionError::LeftInverse { deviation: left_inverse_coeff, tolerance: tol.residual });
    }
    let left_inverse_torus = torus_identity_deviation(&gf, problem.torus_grid).map_err(CompletionError::Kernel)?;

    // 2-3. kernel and its commutator test
    let kernel = mult_kernel(g, window).map_err(CompletionError::Kernel)?;
    let commutator = doubly_commuting_test(&kernel, tol.commute).map_err(CompletionError::Kernel)?;
    if !commutator.verdict {
        return Err(CompletionError::NotDoublyCommuting(Box::new(commutator)));
    }

    // 4. inner symbol of the kernel
    let opts = ExtractOptions { commute_tol: tol.commute, inner_tol: tol.residual, torus_grid: problem.torus_grid };
    let (theta, inner_cert, kernel_range_distance) = if kernel.dimension() == 0 {
        let theta = OperatorSymbol::zero(window, problem.dim_ec(), 0);
        let cert = innerness_certificate(&theta, d - 1, problem.torus_grid, tol.residual)
            .map_err(CompletionError::Extraction)?;
        (theta, cert, 0.0)
    } else {
        let ex = beurling::extract_after_test(&kernel, commutator.clone(), &opts)
            .map_err(CompletionError::Extraction)?;
        if ex.range_distance > tol.range {
            return Err(CompletionError::Extraction(Error::RangeMismatch { distance: ex.range_distance }));
        }
        (ex.theta, ex.certificate, ex.range_distance)
    };

    // 5. dim E_c = dim E_a + rank g
    let rank = local_rank_with_tol(g, problem.rank_samples, problem.seed, tol.rank).map_err(CompletionError::Kernel)?;
    let dim_check = check_rank_nullity(g, &theta, &rank);
    if !dim_check.satisfied {
        return Err(CompletionError::RankNullity { check: dim_check, rank });
    }

    // 6-7. F = [f | Θ], Ω = [g ; Γ]
    let theta_w = theta.with_window_degree(d).map_err(CompletionError::Extraction)?;
    let f_full = f.hcat(&theta_w).map_err(CompletionError::Gamma)?;
    let (gamma, gamma_solve) = solve_gamma(&theta_w, f, g, window).map_err(CompletionError::Gamma)?;
    if gamma_solve > tol.residual {
        return Err(CompletionError::Gamma(Error::GammaResidual { residual: gamma_solve, tolerance: tol.residual }));
    }
    let omega = g.vcat(&gamma).map_err(CompletionError::Gamma)?;

    // 8. residuals
    let ver = verify_completion(&f_full, &omega, window, problem.torus_grid, None, tol.residual)
        .map_err(CompletionError::Gamma)?;
    let residuals = Residuals {
        left_inverse_coeff,
        left_inverse_torus,
        f_omega_coeff: ver.f_omega_coeff,
        f_omega_torus: ver.f_omega_torus,
        omega_f_coeff: ver.omega_f_coeff,
        omega_f_torus: ver.omega_f_torus,
        gamma_solve,
    };
    let success = ver.pass && inner_cert.pass && left_inverse_torus <= tol.residual;
    Ok(CompletionResult {
        theta,
        f_full,
        omega,
        gamma,
        inner_cert,
        residuals,
        dim_check,
        rank,
        commutator,
        kernel_dimension: kernel.dimension(),
        kernel_range_distance,
        tolerances: tol,
        success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::{exp_monomial_symbol, MultiIndex};
    use crate::linalg::{ONE, ZERO};
    use crate::subspace::projection_distance;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn z1_minus_one() -> OperatorSymbol {
        let win = DegreeWindow::new(1, 1).unwrap();
        let mut g = OperatorSymbol::zero(&win, 1, 2);
        g.add_term(&MultiIndex::zero(1), &CMat::from_row_slice(1, 2, &[ZERO, -ONE])).unwrap();
        g.add_term(&MultiIndex::unit(1, 0), &CMat::from_row_slice(1, 2, &[ONE, ZERO])).unwrap();
        g
    }

    #[test]
    fn kernel_of_scalar_exponential_is_trivial() {
        let win = DegreeWindow::new(1, 6).unwrap();
        let g = exp_monomial_symbol(1, 0, c(-1.0), 6).unwrap();
        assert_eq!(mult_kernel(&g, &win).unwrap().dimension(), 0);
    }

    #[test]
    fn kernel_of_identity_is_zero() {
        let win = DegreeWindow::new(2, 3).unwrap();
        let g = OperatorSymbol::identity(2, 2).unwrap();
        assert_eq!(mult_kernel(&g, &win).unwrap().dimension(), 0);
    }

    #[test]
    fn kernel_of_z1_minus_one() {
        let d = 5;
        let win = DegreeWindow::new(1, d).unwrap();
        let k = mult_kernel(&z1_minus_one(), &win).unwrap();
        // (h, z h) with z h still inside the window
        assert_eq!(k.dimension(), d as usize);
        let gens: Vec<HardyElement> = (0..d)
            .map(|p| {
                let mut v = vec![ZERO; 2 * (d as usize + 1)];
                v[2 * p as usize] = ONE;
                v[2 * (p as usize + 1) + 1] = ONE;
                HardyElement::from_coeffs(&win, 2, v).unwrap()
            })
            .collect();
        let expect = crate::subspace::orthonormalize(&gens, 1e-8).unwrap();
        assert!(projection_distance(&k, &expect).unwrap() < 1e-12);
    }

    #[test]
    fn rank_examples() {
        let g = exp_monomial_symbol(3, 0, c(-1.0), 8).unwrap();
        let win = g.window().clone();
        let g3 = g.hcat(&OperatorSymbol::zero(&win, 1, 2)).unwrap();
        assert_eq!(local_rank(&g3, 64, 1).unwrap().rank, 1);
        assert_eq!(local_rank(&OperatorSymbol::identity(2, 2).unwrap(), 64, 1).unwrap().rank, 2);
        let win = DegreeWindow::new(2, 1).unwrap();
        let mut dup = OperatorSymbol::zero(&win, 2, 2);
        dup.add_term(&MultiIndex::unit(2, 0), &CMat::from_row_slice(2, 2, &[ONE, ZERO, ONE, ZERO])).unwrap();
        dup.add_term(&MultiIndex::unit(2, 1), &CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ONE])).unwrap();
        let rep = local_rank(&dup, 64, 7).unwrap();
        assert_eq!(rep.rank, 1);
        assert_eq!(rep, local_rank(&dup, 64, 7).unwrap());
    }

    #[test]
    fn complete_z1_minus_one() {
        let win = DegreeWindow::new(1, 4).unwrap();
        let f = OperatorSymbol::constant(1, CMat::from_row_slice(2, 1, &[ZERO, -ONE])).unwrap();
        let p = CompletionProblem::new(f, z1_minus_one(), win).unwrap();
        let r = complete(&p).unwrap();
        assert!(r.success, "{:?}", r.residuals);
        assert_eq!((r.dim_check.dim_ea, r.dim_check.rank_g, r.dim_check.dim_ec), (1, 1, 2));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let t0 = r.theta.constant_term();
        assert!((t0[(0, 0)] - c(s)).norm() < 1e-12 && t0[(1, 0)].norm() < 1e-12);
        let g0 = r.gamma.constant_term();
        assert!((g0[(0, 0)] - c(2f64.sqrt())).norm() < 1e-10 && g0[(0, 1)].norm() < 1e-10);
    }

    #[test]
    fn complete_trivial_kernel() {
        let win = DegreeWindow::new(1, 6).unwrap();
        let f = exp_monomial_symbol(1, 0, c(1.0), 6).unwrap();
        let g = exp_monomial_symbol(1, 0, c(-1.0), 6).unwrap();
        let r = complete(&CompletionProblem::new(f.clone(), g.clone(), win).unwrap()).unwrap();
        assert!(r.success);
        assert_eq!(r.theta.cols(), 0);
        assert_eq!(r.f_full, f);
        assert_eq!(r.omega, g);
    }

    #[test]
    fn complete_constant_isometry() {
        let win = DegreeWindow::new(2, 2).unwrap();
        let f = OperatorSymbol::constant(2, CMat::from_row_slice(2, 1, &[ONE, ZERO])).unwrap();
        let g = OperatorSymbol::constant(2, CMat::from_row_slice(1, 2, &[ONE, ZERO])).unwrap();
        let r = complete(&CompletionProblem::new(f, g, win).unwrap()).unwrap();
        assert!(r.success);
        let id = CMat::identity(2, 2);
        assert!((r.f_full.constant_term() - &id).norm() < 1e-14 && r.f_full.degree() == 0);
        assert!((r.omega.constant_term() - &id).norm() < 1e-14 && r.omega.degree() == 0);
    }

    #[test]
    fn left_inverse_failure_names_stage_one() {
        let win = DegreeWindow::new(2, 3).unwrap();
        let mut f = OperatorSymbol::zero(&win, 2, 1);
        f.add_term(&MultiIndex::unit(2, 0), &CMat::from_row_slice(2, 1, &[ONE, ZERO])).unwrap();
        f.add_term(&MultiIndex::unit(2, 1), &CMat::from_row_slice(2, 1, &[ZERO, ONE])).unwrap();
        let g = OperatorSymbol::constant(2, CMat::from_row_slice(1, 2, &[ONE, ONE])).unwrap();
        let err = complete(&CompletionProblem::new(f, g, win).unwrap()).unwrap_err();
        assert_eq!(err.stage().0, 1);
    }

    #[test]
    fn verify_detects_scaled_column() {
        let win = DegreeWindow::new(1, 2).unwrap();
        let id = OperatorSymbol::identity(1, 2).unwrap();
        let rep = verify_completion(&id, &id, &win, 8, Some(1), 1e-10).unwrap();
        assert!(rep.pass && rep.f_omega_coeff == 0.0 && rep.omega_f_torus == 0.0);
        let scaled = OperatorSymbol::constant(1, CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c(2.0)])).unwrap();
        let rep = verify_completion(&scaled, &id, &win, 8, Some(1), 1e-10).unwrap();
        assert!(!rep.pass);
        assert!(rep.omega_f_coeff >= 0.5);
        assert!(!rep.inner.unwrap().pass);
    }

    #[test]
    fn window_must_hold_inputs() {
        let f = exp_monomial_symbol(1, 0, c(1.0), 6).unwrap();
        let g = exp_monomial_symbol(1, 0, c(-1.0), 6).unwrap();
        let err = CompletionProblem::new(f, g, DegreeWindow::new(1, 5).unwrap()).unwrap_err();
        assert!(matches!(err, Error::WindowTooSmall { window: 5, required: 6 }));
    }
}
