//! Independent reference computations for the integration tests. Nothing here
//! calls into the library's linear algebra; symbols are plain coefficient maps.
#![allow(dead_code)]

use std::collections::BTreeMap;

use hardy_factor::hardy::OperatorSymbol;
use nalgebra::DMatrix;
use num_complex::Complex64 as C;

pub type Poly = BTreeMap<Vec<u32>, DMatrix<C>>;

pub fn to_poly(s: &OperatorSymbol) -> Poly {
    s.terms().map(|(k, m)| (k.entries().to_vec(), m.clone())).collect()
}

/// Product modulo every `z_i^{d+1}`.
pub fn mul_mod(a: &Poly, b: &Poly, d: u32, rows: usize, cols: usize) -> Poly {
    let mut out: Poly = BTreeMap::new();
    for (ka, ma) in a {
        for (kb, mb) in b {
            let k: Vec<u32> = ka.iter().zip(kb).map(|(x, y)| x + y).collect();
            if k.iter().any(|&e| e > d) {
                continue;
            }
            let e = out.entry(k).or_insert_with(|| DMatrix::zeros(rows, cols));
            *e += ma * mb;
        }
    }
    out
}

pub fn max_identity_deviation(p: &Poly, n: usize, size: usize) -> f64 {
    let zero = vec![0u32; n];
    let mut dev: f64 = 0.0;
    let mut saw = false;
    for (k, m) in p {
        let m = if *k == zero {
            saw = true;
            m - DMatrix::<C>::identity(size, size)
        } else {
            m.clone()
        };
        dev = dev.max(m.iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    if !saw {
        dev = dev.max(1.0);
    }
    dev
}

pub fn eval(p: &Poly, z: &[C], rows: usize, cols: usize) -> DMatrix<C> {
    let mut out = DMatrix::zeros(rows, cols);
    for (k, m) in p {
        let mut mono = C::new(1.0, 0.0);
        for (zi, &e) in z.iter().zip(k) {
            mono *= zi.powu(e);
        }
        out += m * mono;
    }
    out
}

pub fn spectral_norm(m: &DMatrix<C>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().copied().fold(0.0, f64::max)
}

/// Max of `‖P(ζ) - I‖` over `g^n` roots of unity offset by a half step.
pub fn torus_identity_deviation(p: &Poly, n: usize, size: usize, g: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for code in 0..g.pow(n as u32) {
        let mut c = code;
        let z: Vec<C> = (0..n)
            .map(|_| {
                let j = c % g;
                c /= g;
                C::from_polar(1.0, std::f64::consts::TAU * (j as f64 + 0.5) / g as f64)
            })
            .collect();
        let v = eval(p, &z, size, size) - DMatrix::<C>::identity(size, size);
        worst = worst.max(spectral_norm(&v));
    }
    worst
}

/// All exponent vectors with entries `0..=d`, in plain lexicographic order.
pub fn exponents(n: usize, d: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out.into_iter().flat_map(|p| (0..=d).map(move |e| [p.clone(), vec![e]].concat())).collect();
    }
    out
}

/// Dense matrix of `h -> Φ h` from the window of degree `d` to the window of
/// degree `d + deg Φ`, coordinates ordered (exponent lex, then component).
pub fn dense_mult_matrix(phi: &Poly, n: usize, d: u32, dphi: u32, rows: usize, cols: usize) -> DMatrix<C> {
    let src = exponents(n, d);
    let dst = exponents(n, d + dphi);
    let index: BTreeMap<&Vec<u32>, usize> = dst.iter().enumerate().map(|(i, k)| (k, i)).collect();
    let mut m = DMatrix::zeros(dst.len() * rows, src.len() * cols);
    for (p, k) in src.iter().enumerate() {
        for (kt, coef) in phi {
            let t: Vec<u32> = k.iter().zip(kt).map(|(a, b)| a + b).collect();
            let q = index[&t];
            for r in 0..rows {
                for c in 0..cols {
                    m[(q * rows + r, p * cols + c)] += coef[(r, c)];
                }
            }
        }
    }
    m
}

/// Null space basis by Gaussian elimination with partial pivoting; rows whose
/// pivot-column entry is below `tol` are skipped, which keeps sparse inputs
/// cheap.
pub fn gaussian_null_space(m: &DMatrix<C>, tol: f64) -> Vec<Vec<C>> {
    let (nr, nc) = m.shape();
    let mut rows: Vec<Vec<C>> = (0..nr).map(|r| m.row(r).iter().copied().collect()).collect();
    let mut used = vec![false; nr];
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; nc];
    for c in 0..nc {
        let mut best = None;
        let mut best_abs = tol;
        for (r, row) in rows.iter().enumerate() {
            if !used[r] && row[c].norm() > best_abs {
                best_abs = row[c].norm();
                best = Some(r);
            }
        }
        let Some(p) = best else { continue };
        used[p] = true;
        let inv = C::new(1.0, 0.0) / rows[p][c];
        for x in rows[p].iter_mut() {
            *x *= inv;
        }
        let prow = rows[p].clone();
        let support: Vec<usize> = (c..nc).filter(|&j| prow[j].norm() > 0.0).collect();
        for (r, row) in rows.iter_mut().enumerate() {
            if r == p || row[c].norm() <= tol * 1e-3 {
                row[c] = C::new(0.0, 0.0);
                continue;
            }
            let f = row[c];
            for &j in &support {
                row[j] -= f * prow[j];
            }
            row[c] = C::new(0.0, 0.0);
        }
        pivot_of_col[c] = Some(p);
    }
    let mut basis = Vec::new();
    for free in (0..nc).filter(|&c| pivot_of_col[c].is_none()) {
        let mut v = vec![C::new(0.0, 0.0); nc];
        v[free] = C::new(1.0, 0.0);
        for (c, p) in pivot_of_col.iter().enumerate() {
            if let Some(p) = p {
                v[c] = -rows[*p][free];
            }
        }
        basis.push(v);
    }
    basis
}

pub fn numerical_rank(m: &DMatrix<C>, rel: f64) -> usize {
    let sv = m.clone().singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel * top).count()
}

/// Best constant `U` with `Θ U = Θ'` by least squares over all coefficients;
/// returns the fit residual and the distance of `U` from unitary.
pub fn constant_unitary_fit(theta: &Poly, theta2: &Poly, rows: usize, cols: usize) -> (f64, f64) {
    let keys: Vec<&Vec<u32>> = theta.keys().chain(theta2.keys()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let a = DMatrix::from_fn(keys.len() * rows, cols, |i, j| theta.get(keys[i / rows]).map_or(C::new(0.0, 0.0), |m| m[(i % rows, j)]));
    let b = DMatrix::from_fn(keys.len() * rows, cols, |i, j| theta2.get(keys[i / rows]).map_or(C::new(0.0, 0.0), |m| m[(i % rows, j)]));
    let u = a.clone().svd(true, true).solve(&b, 1e-12).expect("svd solve");
    let fit = (&a * &u - &b).iter().map(|c| c.norm()).fold(0.0, f64::max);
    let unit = (u.adjoint() * &u - DMatrix::<C>::identity(cols, cols)).iter().map(|c| c.norm()).fold(0.0, f64::max);
    (fit, unit)
}

pub type VecPoly = BTreeMap<Vec<u32>, Vec<C>>;

pub fn element_poly(e: &hardy_factor::hardy::HardyElement) -> VecPoly {
    let dim = e.dim();
    e.window()
        .multi_indices()
        .iter()
        .enumerate()
        .filter_map(|(p, k)| {
            let v = e.coeffs()[p * dim..(p + 1) * dim].to_vec();
            v.iter().any(|c| c.norm() > 0.0).then(|| (k.entries().to_vec(), v))
        })
        .collect()
}

pub fn column_polys(s: &OperatorSymbol) -> Vec<VecPoly> {
    let mut cols: Vec<VecPoly> = vec![BTreeMap::new(); s.cols()];
    for (k, m) in s.terms() {
        for (j, col) in cols.iter_mut().enumerate() {
            let v: Vec<C> = m.column(j).iter().copied().collect();
            if v.iter().any(|c| c.norm() > 0.0) {
                col.insert(k.entries().to_vec(), v);
            }
        }
    }
    cols
}

fn shifted(p: &VecPoly, k: &[u32]) -> VecPoly {
    p.iter().map(|(e, v)| (e.iter().zip(k).map(|(a, b)| a + b).collect(), v.clone())).collect()
}

fn dot(a: &VecPoly, b: &VecPoly) -> C {
    let mut s = C::new(0.0, 0.0);
    for (k, va) in a {
        if let Some(vb) = b.get(k) {
            s += va.iter().zip(vb).map(|(x, y)| x.conj() * y).sum::<C>();
        }
    }
    s
}

/// `max |G - I|` for the family `z^k w_j`, `k` ranging over exponents with
/// `k + degvec(w_j) <= cap` in every variable.
pub fn family_gram_deviation(ws: &[VecPoly], n: usize, cap: u32) -> f64 {
    let mut family = Vec::new();
    for w in ws {
        let degs: Vec<u32> = (0..n).map(|i| w.keys().map(|k| k[i]).max().unwrap_or(0)).collect();
        if degs.iter().any(|&x| x > cap) {
            continue;
        }
        for k in exponents(n, cap) {
            if k.iter().zip(&degs).all(|(a, b)| a + b <= cap) {
                family.push(shifted(w, &k));
            }
        }
    }
    let mut dev: f64 = 0.0;
    for (a, fa) in family.iter().enumerate() {
        for (b, fb) in family.iter().enumerate().skip(a) {
            let g = dot(fa, fb);
            let target = if a == b { 1.0 } else { 0.0 };
            dev = dev.max((g - target).norm());
        }
    }
    dev
}
