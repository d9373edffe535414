//! Seeded generators for inner symbols and the built-in completion problem.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::completion::CompletionProblem;
use crate::error::Result;
use crate::hardy::{exp_monomial_symbol, DegreeWindow, MultiIndex, OperatorSymbol};
use crate::linalg::{CMat, C64, ONE, ZERO};

/// Largest per-variable exponent used by [`random_inner_symbol`].
pub const MAX_INNER_EXPONENT: u32 = 2;

/// Random `rows x cols` matrix with orthonormal columns (QR of a complex
/// Gaussian matrix, phases fixed so the result is a function of the draw).
pub fn random_isometry<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    assert!(cols <= rows, "an isometry needs cols <= rows");
    let g = DMatrix::from_fn(rows, cols, |_, _| {
        C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for i in 0..rows {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// `V diag(z^{k_1}, .., z^{k_m})` with `V` a random isometry: `n` in 1..=3,
/// at most 4 rows, per-variable exponents at most 2.
pub fn random_inner_symbol(seed: u64) -> OperatorSymbol {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3usize);
    let rows = rng.random_range(1..=4usize);
    let cols = rng.random_range(1..=rows);
    let v = random_isometry(&mut rng, rows, cols);
    let exps: Vec<MultiIndex> = (0..cols)
        .map(|_| MultiIndex::new((0..n).map(|_| rng.random_range(0..=MAX_INNER_EXPONENT)).collect()).expect("n >= 1"))
        .collect();
    monomial_column_symbol(&v, &exps)
}

/// Symbol whose column `j` is column `j` of `v` times `z^{k_j}`.
pub fn monomial_column_symbol(v: &CMat, exps: &[MultiIndex]) -> OperatorSymbol {
    let n = exps[0].len();
    let d = exps.iter().map(MultiIndex::max_entry).max().unwrap_or(0);
    let window = DegreeWindow::new(n, d).expect("small window");
    let mut s = OperatorSymbol::zero(&window, v.nrows(), v.ncols());
    for (j, k) in exps.iter().enumerate() {
        let mut m = CMat::zeros(v.nrows(), v.ncols());
        m.set_column(j, &v.column(j));
        s.add_term(k, &m).expect("shape fixed");
    }
    s
}

/// `I - P + z_i P` for an orthogonal projection `P` (zero-based `i`); unitary
/// on the torus.
pub fn potapov_factor(n: usize, i: usize, p: &CMat) -> Result<OperatorSymbol> {
    let size = p.nrows();
    let window = DegreeWindow::new(n, 1)?;
    let mut s = OperatorSymbol::zero(&window, size, size);
    s.add_term(&MultiIndex::zero(n), &(CMat::identity(size, size) - p))?;
    s.add_term(&MultiIndex::unit(n, i), p)?;
    Ok(s)
}

/// `B V` with `B` a random degree-one factor `I - P + z_i P` and `V` a
/// random isometry; inner but not of monomial-column form.
pub fn random_potapov_inner(seed: u64) -> OperatorSymbol {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3usize);
    let rows = rng.random_range(2..=4usize);
    let cols = rng.random_range(1..=rows);
    let rank = rng.random_range(1..rows);
    let i = rng.random_range(0..n);
    let u = random_isometry(&mut rng, rows, rank);
    let p = &u * u.adjoint();
    let v = random_isometry(&mut rng, rows, cols);
    let b = potapov_factor(n, i, &p).expect("valid factor");
    b.mul(&OperatorSymbol::constant(n, v).expect("n >= 1")).expect("shapes match")
}

/// Constant `3 x 2` isometry spanning the last two coordinates.
pub fn example_theta() -> CMat {
    CMat::from_row_slice(3, 2, &[ZERO, ZERO, ONE, ZERO, ZERO, ONE])
}

/// `f = [e^{z_1}; e^{z_2}; e^{z_3}]`, `g = [e^{-z_1}, 0, 0]`, both Taylor
/// truncated at degree `d`, solved on the window of degree `d`.
pub fn exponential_problem(d: u32) -> Result<CompletionProblem> {
    let n = 3;
    let window = DegreeWindow::new(n, d)?;
    let exps = (0..n).map(|i| exp_monomial_symbol(n, i, ONE, d)).collect::<Result<Vec<_>>>()?;
    let f = exps[0].vcat(&exps[1])?.vcat(&exps[2])?;
    let g = exp_monomial_symbol(n, 0, -ONE, d)?.hcat(&OperatorSymbol::zero(&window, 1, 2))?;
    CompletionProblem::new(f, g, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beurling::innerness_certificate;

    #[test]
    fn random_symbols_are_inner_and_reproducible() {
        for seed in 0..20 {
            let t = random_inner_symbol(seed);
            assert_eq!(t, random_inner_symbol(seed));
            assert!(t.cols() <= t.rows() && t.rows() <= 4 && t.n() <= 3 && t.degree() <= 2);
            let c = innerness_certificate(&t, 3, 6, 1e-10).unwrap();
            assert!(c.pass, "seed {seed}: {c:?}");
            let p = random_potapov_inner(seed);
            let c = innerness_certificate(&p, 3, 6, 1e-10).unwrap();
            assert!(c.pass, "potapov seed {seed}: {c:?}");
        }
    }

    #[test]
    fn exponential_problem_is_left_invertible_in_the_window_ring() {
        let p = exponential_problem(8).unwrap();
        let gf = p.g.mul_truncated(&p.f, 8).unwrap();
        assert!(gf.identity_deviation().unwrap() < 1e-13);
        assert_eq!((p.dim_e(), p.dim_ec()), (1, 3));
    }
}
