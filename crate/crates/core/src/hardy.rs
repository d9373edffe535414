//! Truncated Taylor-coefficient model of the vector-valued Hardy space on the
//! polydisc.
//!
//! An element of `H^2_E(D^n)` is stored as its coefficient vectors `a_k in E`
//! for every multi-index `k` in a [`DegreeWindow`] (each exponent at most `d`).
//! Monomials are orthonormal, so the Hardy inner product is the plain `l^2`
//! pairing of coefficients and every operator becomes a finite matrix.
//!
//! Basis order is fixed everywhere: multi-indices in graded lexicographic order
//! (total degree first, then lexicographic), and within one multi-index the
//! coordinate index of `E`. The coefficient of `z^k e_j` therefore lives at
//! position `window.position(k) * dim + j`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{CMat, SparseMat, C64, ONE, ZERO};

/// Largest window (number of multi-indices) this crate will allocate.
const MAX_WINDOW_LEN: usize = 1 << 22;

/// Exponent tuple `k = (k_1, ..., k_n)`. Ordered graded-lexicographically.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidWindow("multi-index needs at least one variable".into()));
        }
        Ok(Self(entries))
    }

    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// `e_i`, zero-based.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        Self(v)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max_entry(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.len(), other.len());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise `k_a <= k_b`.
    pub fn divides(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total().cmp(&other.total()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &k) in self.0.iter().enumerate() {
            if k == 0 {
                continue;
            }
            if !first {
                write!(f, " ")?;
            }
            first = false;
            match k {
                1 => write!(f, "z{}", i + 1)?,
                _ => write!(f, "z{}^{}", i + 1, k)?,
            }
        }
        Ok(())
    }
}

struct WindowTables {
    order: Vec<MultiIndex>,
    /// position in `order`, indexed by the mixed-radix code of the exponents
    lookup: Vec<u32>,
}

/// All multi-indices with `n` entries, each at most `d`.
#[derive(Clone)]
pub struct DegreeWindow {
    n: usize,
    d: u32,
    tables: Arc<WindowTables>,
}

impl DegreeWindow {
    pub fn new(n: usize, d: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidWindow("variable count must be at least 1".into()));
        }
        let side = d as usize + 1;
        let len = side
            .checked_pow(n as u32)
            .filter(|&l| l <= MAX_WINDOW_LEN)
            .ok_or_else(|| Error::InvalidWindow(format!("window (n={n}, d={d}) is too large")))?;
        let mut order: Vec<MultiIndex> = (0..len)
            .map(|mut code| {
                let mut k = vec![0u32; n];
                for e in k.iter_mut() {
                    *e = (code % side) as u32;
                    code /= side;
                }
                MultiIndex(k)
            })
            .collect();
        order.sort();
        let mut lookup = vec![0u32; len];
        for (pos, k) in order.iter().enumerate() {
            lookup[radix_code(&k.0, side)] = pos as u32;
        }
        Ok(Self { n, d, tables: Arc::new(WindowTables { order, lookup }) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    /// Number of multi-indices, `(d+1)^n`.
    pub fn len(&self) -> usize {
        self.tables.order.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn multi_indices(&self) -> &[MultiIndex] {
        &self.tables.order
    }

    pub fn contains(&self, k: &[u32]) -> bool {
        k.len() == self.n && k.iter().all(|&x| x <= self.d)
    }

    pub fn position_of(&self, k: &[u32]) -> Option<usize> {
        self.contains(k).then(|| self.tables.lookup[radix_code(k, self.d as usize + 1)] as usize)
    }

    pub fn position(&self, k: &MultiIndex) -> Option<usize> {
        self.position_of(&k.0)
    }

    pub fn with_degree(&self, d: u32) -> Result<Self> {
        Self::new(self.n, d)
    }

    /// Positions of multi-indices inside the guard window (every exponent at
    /// most `d - 1`), as a per-position mask.
    pub fn guard_mask(&self) -> Vec<bool> {
        self.tables.order.iter().map(|k| self.d > 0 && k.max_entry() < self.d).collect()
    }
}

fn radix_code(k: &[u32], side: usize) -> usize {
    k.iter().rev().fold(0usize, |acc, &x| acc * side + x as usize)
}

impl PartialEq for DegreeWindow {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d
    }
}

impl Eq for DegreeWindow {}

impl fmt::Debug for DegreeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DegreeWindow(n={}, d={})", self.n, self.d)
    }
}

/// A point of the torus `T^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint(Vec<C64>);

impl TorusPoint {
    pub fn new(coords: Vec<C64>) -> Result<Self> {
        for (i, z) in coords.iter().enumerate() {
            if (z.norm() - 1.0).abs() > 1e-14 {
                return Err(Error::NotOnTorus { index: i, modulus: z.norm() });
            }
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[C64] {
        &self.0
    }
}

/// Tensor grid of `g` roots of unity per axis, rotated by half a step so that
/// no sample sits on `1` or `-1`.
pub fn torus_grid(n: usize, g: usize) -> Vec<TorusPoint> {
    let axis: Vec<C64> = (0..g)
        .map(|j| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / g as f64))
        .collect();
    let total = g.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut z = Vec::with_capacity(n);
            for _ in 0..n {
                z.push(axis[code % g]);
                code /= g;
            }
            TorusPoint(z)
        })
        .collect()
}

/// Truncated element of `H^2_E(D^n)` with `E = C^dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct HardyElement {
    window: DegreeWindow,
    dim: usize,
    coeffs: Vec<C64>,
}

impl HardyElement {
    pub fn zero(window: &DegreeWindow, dim: usize) -> Self {
        Self { window: window.clone(), dim, coeffs: vec![ZERO; window.len() * dim] }
    }

    /// Coefficients in basis order (see module docs).
    pub fn from_coeffs(window: &DegreeWindow, dim: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != window.len() * dim {
            return Err(Error::ShapeMismatch(format!(
                "expected {} coefficients, got {}",
                window.len() * dim,
                coeffs.len()
            )));
        }
        Ok(Self { window: window.clone(), dim, coeffs })
    }

    /// `z^k e_j`
    pub fn monomial(window: &DegreeWindow, dim: usize, k: &MultiIndex, j: usize) -> Result<Self> {
        let pos = window
            .position(k)
            .ok_or(Error::DegreeExceedsWindow { degree: k.max_entry(), window: window.d() })?;
        if j >= dim {
            return Err(Error::ShapeMismatch(format!("coordinate {j} out of range for dimension {dim}")));
        }
        let mut e = Self::zero(window, dim);
        e.coeffs[pos * dim + j] = ONE;
        Ok(e)
    }

    /// Constant function with value `eta`.
    pub fn constant(window: &DegreeWindow, eta: &[C64]) -> Self {
        let mut e = Self::zero(window, eta.len());
        e.coeffs[..eta.len()].copy_from_slice(eta);
        e
    }

    pub fn window(&self) -> &DegreeWindow {
        &self.window
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn coeff(&self, k: &MultiIndex) -> Option<&[C64]> {
        self.window.position(k).map(|p| &self.coeffs[p * self.dim..(p + 1) * self.dim])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Largest exponent appearing in a nonzero coefficient.
    pub fn degree(&self) -> u32 {
        self.window
            .multi_indices()
            .iter()
            .enumerate()
            .filter(|(p, _)| self.coeffs[p * self.dim..(p + 1) * self.dim].iter().any(|c| *c != ZERO))
            .map(|(_, k)| k.max_entry())
            .max()
            .unwrap_or(0)
    }

    /// Re-expresses the element in a window of degree `d`. Enlarging is exact;
    /// shrinking drops every coefficient outside the new window.
    pub fn resized(&self, d: u32) -> Result<Self> {
        let target = self.window.with_degree(d)?;
        let mut out = Self::zero(&target, self.dim);
        for (p, k) in self.window.multi_indices().iter().enumerate() {
            if let Some(q) = target.position(k) {
                out.coeffs[q * self.dim..(q + 1) * self.dim]
                    .copy_from_slice(&self.coeffs[p * self.dim..(p + 1) * self.dim]);
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, a: C64) -> Self {
        Self { window: self.window.clone(), dim: self.dim, coeffs: self.coeffs.iter().map(|c| c * a).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(self, other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Self { window: self.window.clone(), dim: self.dim, coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-ONE))
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        check_same(self, other)?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    pub fn to_sparse_column(&self) -> Vec<(usize, C64)> {
        self.coeffs.iter().enumerate().filter(|(_, c)| **c != ZERO).map(|(i, c)| (i, *c)).collect()
    }
}

fn check_same(f: &HardyElement, g: &HardyElement) -> Result<()> {
    if f.window != g.window || f.dim != g.dim {
        return Err(Error::ShapeMismatch(format!(
            "elements live in different spaces: {:?} x C^{} vs {:?} x C^{}",
            f.window, f.dim, g.window, g.dim
        )));
    }
    Ok(())
}

/// `z^k e_j` for every `k` in the window and `j < dim`, in basis order.
pub fn monomial_basis(window: &DegreeWindow, dim: usize) -> Vec<HardyElement> {
    let n = window.len() * dim;
    (0..n)
        .map(|i| {
            let mut e = HardyElement::zero(window, dim);
            e.coeffs[i] = ONE;
            e
        })
        .collect()
}

/// `<f, g> = sum_k <a_k, b_k>`, linear in `f` and conjugate-linear in `g`.
pub fn inner_product(f: &HardyElement, g: &HardyElement) -> Result<C64> {
    check_same(f, g)?;
    Ok(f.coeffs.iter().zip(&g.coeffs).map(|(a, b)| a * b.conj()).sum())
}

fn check_var(i: usize, n: usize) -> Result<()> {
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    Ok(())
}

/// Multiplication by `z_i` (zero-based `i`). The output window has degree
/// `d + 1`, so nothing is lost.
pub fn shift(i: usize, f: &HardyElement) -> Result<HardyElement> {
    let w = &f.window;
    check_var(i, w.n())?;
    let out_w = w.with_degree(w.d() + 1)?;
    let mut out = HardyElement::zero(&out_w, f.dim);
    let mut k = vec![0u32; w.n()];
    for (p, src) in w.multi_indices().iter().enumerate() {
        k.copy_from_slice(src.entries());
        k[i] += 1;
        let q = out_w.position_of(&k).expect("shifted index fits enlarged window");
        out.coeffs[q * f.dim..(q + 1) * f.dim].copy_from_slice(&f.coeffs[p * f.dim..(p + 1) * f.dim]);
    }
    Ok(out)
}

/// Backward shift `M_{z_i}^*`: the coefficient at `k` becomes the old
/// coefficient at `k + e_i`. Same window as the input.
pub fn shift_adjoint(i: usize, f: &HardyElement) -> Result<HardyElement> {
    let w = &f.window;
    check_var(i, w.n())?;
    let mut out = HardyElement::zero(w, f.dim);
    let mut k = vec![0u32; w.n()];
    for (p, dst) in w.multi_indices().iter().enumerate() {
        k.copy_from_slice(dst.entries());
        k[i] += 1;
        if let Some(q) = w.position_of(&k) {
            out.coeffs[p * f.dim..(p + 1) * f.dim].copy_from_slice(&f.coeffs[q * f.dim..(q + 1) * f.dim]);
        }
    }
    Ok(out)
}

/// Matrix of `M_{z_i}` on the window, truncated: monomials with `k_i = d` are
/// sent to zero. Its adjoint is exactly the backward shift on the window.
pub fn shift_matrix(window: &DegreeWindow, dim: usize, i: usize) -> Result<SparseMat> {
    check_var(i, window.n())?;
    let n = window.len() * dim;
    let mut k = vec![0u32; window.n()];
    let cols = window
        .multi_indices()
        .iter()
        .flat_map(|src| {
            k.copy_from_slice(src.entries());
            k[i] += 1;
            let target = window.position_of(&k);
            (0..dim).map(move |j| target.map(|q| vec![(q * dim + j, ONE)]).unwrap_or_default())
        })
        .collect();
    Ok(SparseMat::from_columns(n, cols))
}

/// Truncated Cauchy–Szegő kernel `S(., w) eta`, coefficient `conj(w)^k eta`.
pub fn cauchy_kernel_element(w: &[C64], eta: &[C64], window: &DegreeWindow) -> Result<HardyElement> {
    if w.len() != window.n() {
        return Err(Error::ShapeMismatch(format!("point has {} coordinates, window has {}", w.len(), window.n())));
    }
    for (i, z) in w.iter().enumerate() {
        if z.norm() >= 1.0 {
            return Err(Error::OutsidePolydisc { index: i, modulus: z.norm() });
        }
    }
    let conj: Vec<C64> = w.iter().map(|z| z.conj()).collect();
    let mut out = HardyElement::zero(window, eta.len());
    for (p, k) in window.multi_indices().iter().enumerate() {
        let m = monomial_value(&conj, k);
        for (j, e) in eta.iter().enumerate() {
            out.coeffs[p * eta.len() + j] = m * e;
        }
    }
    Ok(out)
}

fn monomial_value(z: &[C64], k: &MultiIndex) -> C64 {
    z.iter().zip(k.entries()).map(|(zi, &ki)| zi.powu(ki)).product()
}

/// Per-variable power tables `z_i^0 .. z_i^d`.
fn power_table(z: &[C64], d: u32) -> Vec<Vec<C64>> {
    z.iter()
        .map(|&zi| {
            let mut p = Vec::with_capacity(d as usize + 1);
            let mut acc = ONE;
            for _ in 0..=d {
                p.push(acc);
                acc *= zi;
            }
            p
        })
        .collect()
}

/// Value `f(z)` of the polynomial element at any point of `C^n`.
pub fn evaluate_element(f: &HardyElement, z: &[C64]) -> Result<Vec<C64>> {
    if z.len() != f.window.n() {
        return Err(Error::ShapeMismatch(format!("point has {} coordinates, expected {}", z.len(), f.window.n())));
    }
    let pw = power_table(z, f.window.d());
    let mut out = vec![ZERO; f.dim];
    for (p, k) in f.window.multi_indices().iter().enumerate() {
        let block = &f.coeffs[p * f.dim..(p + 1) * f.dim];
        if block.iter().all(|c| *c == ZERO) {
            continue;
        }
        let m: C64 = k.entries().iter().enumerate().map(|(i, &e)| pw[i][e as usize]).product();
        for (o, c) in out.iter_mut().zip(block) {
            *o += m * c;
        }
    }
    Ok(out)
}

/// Matrix-valued polynomial `Phi(z) = sum_k Phi_k z^k`, mapping `C^cols` to
/// `C^rows`. Only nonzero coefficients are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSymbol {
    window: DegreeWindow,
    rows: usize,
    cols: usize,
    terms: BTreeMap<MultiIndex, CMat>,
}

impl OperatorSymbol {
    pub fn zero(window: &DegreeWindow, rows: usize, cols: usize) -> Self {
        Self { window: window.clone(), rows, cols, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, m: CMat) -> Result<Self> {
        let w = DegreeWindow::new(n, 0)?;
        let mut s = Self::zero(&w, m.nrows(), m.ncols());
        s.add_term(&MultiIndex::zero(n), &m)?;
        Ok(s)
    }

    pub fn identity(n: usize, dim: usize) -> Result<Self> {
        Self::constant(n, CMat::identity(dim, dim))
    }

    pub fn from_terms(
        window: &DegreeWindow,
        rows: usize,
        cols: usize,
        terms: impl IntoIterator<Item = (MultiIndex, CMat)>,
    ) -> Result<Self> {
        let mut s = Self::zero(window, rows, cols);
        for (k, m) in terms {
            s.add_term(&k, &m)?;
        }
        Ok(s)
    }

    /// Adds `m z^k` to the symbol.
    pub fn add_term(&mut self, k: &MultiIndex, m: &CMat) -> Result<()> {
        if m.shape() != (self.rows, self.cols) {
            return Err(Error::ShapeMismatch(format!(
                "coefficient is {}x{}, symbol is {}x{}",
                m.nrows(),
                m.ncols(),
                self.rows,
                self.cols
            )));
        }
        if !self.window.contains(k.entries()) {
            return Err(Error::DegreeExceedsWindow { degree: k.max_entry(), window: self.window.d() });
        }
        let entry = self.terms.entry(k.clone()).or_insert_with(|| CMat::zeros(m.nrows(), m.ncols()));
        *entry += m;
        if entry.iter().all(|c| *c == ZERO) {
            self.terms.remove(k);
        }
        Ok(())
    }

    pub fn window(&self) -> &DegreeWindow {
        &self.window
    }

    pub fn n(&self) -> usize {
        self.window.n()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &CMat)> {
        self.terms.iter()
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, k: &MultiIndex) -> Option<&CMat> {
        self.terms.get(k)
    }

    /// Constant coefficient (zero matrix if absent).
    pub fn constant_term(&self) -> CMat {
        self.terms.get(&MultiIndex::zero(self.n())).cloned().unwrap_or_else(|| CMat::zeros(self.rows, self.cols))
    }

    /// Largest exponent carried by a stored coefficient.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::max_entry).max().unwrap_or(0)
    }

    /// Same symbol in a window of degree `d`; fails if a term would be lost.
    pub fn with_window_degree(&self, d: u32) -> Result<Self> {
        if self.degree() > d {
            return Err(Error::DegreeExceedsWindow { degree: self.degree(), window: d });
        }
        Ok(Self { window: self.window.with_degree(d)?, rows: self.rows, cols: self.cols, terms: self.terms.clone() })
    }

    /// Shrinks the window to the actual degree.
    pub fn trimmed(&self) -> Self {
        self.with_window_degree(self.degree()).expect("degree always fits")
    }

    /// Drops every term with degree above `d` and sets the window to `d`.
    pub fn truncated(&self, d: u32) -> Result<Self> {
        let window = self.window.with_degree(d)?;
        let terms = self.terms.iter().filter(|(k, _)| k.max_entry() <= d).map(|(k, m)| (k.clone(), m.clone())).collect();
        Ok(Self { window, rows: self.rows, cols: self.cols, terms })
    }

    /// Zeroes coefficient entries with modulus at or below `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut out = Self::zero(&self.window, self.rows, self.cols);
        for (k, m) in &self.terms {
            let p = m.map(|c| if c.norm() > tol { c } else { ZERO });
            if p.iter().any(|c| *c != ZERO) {
                out.terms.insert(k.clone(), p);
            }
        }
        out
    }

    /// Column `j` as an element of `H^2_{C^rows}` in the symbol's window.
    pub fn column(&self, j: usize) -> Result<HardyElement> {
        if j >= self.cols {
            return Err(Error::ShapeMismatch(format!("column {j} out of range for {} columns", self.cols)));
        }
        let mut e = HardyElement::zero(&self.window, self.rows);
        for (k, m) in &self.terms {
            let p = self.window.position(k).expect("term inside window");
            for r in 0..self.rows {
                e.coeffs[p * self.rows + r] = m[(r, j)];
            }
        }
        Ok(e)
    }

    pub fn columns(&self) -> Vec<HardyElement> {
        (0..self.cols).map(|j| self.column(j).expect("in range")).collect()
    }

    /// Symbol whose columns are the given elements (all in one space).
    pub fn from_columns(window: &DegreeWindow, rows: usize, columns: &[HardyElement]) -> Result<Self> {
        let mut terms: BTreeMap<MultiIndex, CMat> = BTreeMap::new();
        for (j, c) in columns.iter().enumerate() {
            if c.window.n() != window.n() || c.dim != rows {
                return Err(Error::ShapeMismatch("column does not match the symbol shape".into()));
            }
            for (p, k) in c.window.multi_indices().iter().enumerate() {
                let block = &c.coeffs[p * rows..(p + 1) * rows];
                if block.iter().all(|x| *x == ZERO) {
                    continue;
                }
                if !window.contains(k.entries()) {
                    return Err(Error::DegreeExceedsWindow { degree: k.max_entry(), window: window.d() });
                }
                let m = terms.entry(k.clone()).or_insert_with(|| CMat::zeros(rows, columns.len()));
                for (r, x) in block.iter().enumerate() {
                    m[(r, j)] = *x;
                }
            }
        }
        Ok(Self { window: window.clone(), rows, cols: columns.len(), terms })
    }

    fn joint_window(&self, other: &Self) -> Result<DegreeWindow> {
        if self.n() != other.n() {
            return Err(Error::ShapeMismatch(format!("symbols in {} and {} variables", self.n(), other.n())));
        }
        self.window.with_degree(self.window.d().max(other.window.d()))
    }

    /// `[self | other]`
    pub fn hcat(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::ShapeMismatch(format!("row counts {} and {} differ", self.rows, other.rows)));
        }
        let window = self.joint_window(other)?;
        let cols = self.cols + other.cols;
        let mut out = Self::zero(&window, self.rows, cols);
        for (k, m) in &self.terms {
            let mut b = CMat::zeros(self.rows, cols);
            b.view_mut((0, 0), (self.rows, self.cols)).copy_from(m);
            out.add_term(k, &b)?;
        }
        for (k, m) in &other.terms {
            let mut b = CMat::zeros(self.rows, cols);
            b.view_mut((0, self.cols), (self.rows, other.cols)).copy_from(m);
            out.add_term(k, &b)?;
        }
        Ok(out)
    }

    /// `[self ; other]`
    pub fn vcat(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::ShapeMismatch(format!("column counts {} and {} differ", self.cols, other.cols)));
        }
        let window = self.joint_window(other)?;
        let rows = self.rows + other.rows;
        let mut out = Self::zero(&window, rows, self.cols);
        for (k, m) in &self.terms {
            let mut b = CMat::zeros(rows, self.cols);
            b.view_mut((0, 0), (self.rows, self.cols)).copy_from(m);
            out.add_term(k, &b)?;
        }
        for (k, m) in &other.terms {
            let mut b = CMat::zeros(rows, self.cols);
            b.view_mut((self.rows, 0), (other.rows, self.cols)).copy_from(m);
            out.add_term(k, &b)?;
        }
        Ok(out)
    }

    /// Columns `start..end`.
    pub fn column_range(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.cols {
            return Err(Error::ShapeMismatch(format!("column range {start}..{end} of {}", self.cols)));
        }
        let mut out = Self::zero(&self.window, self.rows, end - start);
        for (k, m) in &self.terms {
            out.add_term(k, &m.columns(start, end - start).into_owned())?;
        }
        Ok(out)
    }

    pub fn lin_comb(&self, a: C64, other: &Self, b: C64) -> Result<Self> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::ShapeMismatch("symbols of different shapes".into()));
        }
        let window = self.joint_window(other)?;
        let mut out = Self::zero(&window, self.rows, self.cols);
        for (k, m) in &self.terms {
            out.add_term(k, &(m * a))?;
        }
        for (k, m) in &other.terms {
            out.add_term(k, &(m * b))?;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.lin_comb(ONE, other, -ONE)
    }

    /// Right multiplication by a constant matrix.
    pub fn mul_constant(&self, u: &CMat) -> Result<Self> {
        if u.nrows() != self.cols {
            return Err(Error::ShapeMismatch("constant factor does not compose".into()));
        }
        let mut out = Self::zero(&self.window, self.rows, u.ncols());
        for (k, m) in &self.terms {
            out.add_term(k, &(m * u))?;
        }
        Ok(out)
    }

    /// Exact polynomial product; the result window has degree `d_self + d_rhs`.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        let d = self.window.d() + rhs.window.d();
        self.product(rhs, d)
    }

    /// Product computed modulo every monomial outside the window of degree `d`
    /// (the quotient of the polynomial ring by `z_i^{d+1}`, which is again a
    /// ring, so truncated products are associative).
    pub fn mul_truncated(&self, rhs: &Self, d: u32) -> Result<Self> {
        self.product(rhs, d)
    }

    fn product(&self, rhs: &Self, d: u32) -> Result<Self> {
        if self.n() != rhs.n() {
            return Err(Error::ShapeMismatch(format!("symbols in {} and {} variables", self.n(), rhs.n())));
        }
        if self.cols != rhs.rows {
            return Err(Error::ShapeMismatch(format!(
                "cannot compose {}x{} with {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let window = self.window.with_degree(d)?;
        let mut acc: BTreeMap<MultiIndex, CMat> = BTreeMap::new();
        for (ka, a) in &self.terms {
            for (kb, b) in &rhs.terms {
                let k = ka.add(kb);
                if k.max_entry() > d {
                    continue;
                }
                let prod = a * b;
                match acc.get_mut(&k) {
                    Some(m) => *m += prod,
                    None => {
                        acc.insert(k, prod);
                    }
                }
            }
        }
        acc.retain(|_, m| m.iter().any(|c| *c != ZERO));
        Ok(Self { window, rows: self.rows, cols: rhs.cols, terms: acc })
    }

    /// Max coefficient modulus of `self - I` (square symbols).
    pub fn identity_deviation(&self) -> Result<f64> {
        if self.rows != self.cols {
            return Err(Error::ShapeMismatch("identity deviation needs a square symbol".into()));
        }
        let zero = MultiIndex::zero(self.n());
        let mut dev: f64 = 0.0;
        let mut saw_const = false;
        for (k, m) in &self.terms {
            let d = if *k == zero {
                saw_const = true;
                m - CMat::identity(self.rows, self.rows)
            } else {
                m.clone()
            };
            dev = dev.max(d.iter().map(|c| c.norm()).fold(0.0, f64::max));
        }
        if !saw_const && self.rows > 0 {
            dev = dev.max(1.0);
        }
        Ok(dev)
    }

    pub fn max_coeff_abs(&self) -> f64 {
        self.terms.values().flat_map(|m| m.iter()).map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `sum_k Phi_k z^k` at an arbitrary point of `C^n`.
    pub fn evaluate(&self, z: &[C64]) -> Result<CMat> {
        evaluate_symbol(self, z)
    }
}

/// `Phi(z)` at any point of `C^n` (finite sum, exact for polynomial data).
pub fn evaluate_symbol(phi: &OperatorSymbol, z: &[C64]) -> Result<CMat> {
    if z.len() != phi.n() {
        return Err(Error::ShapeMismatch(format!("point has {} coordinates, expected {}", z.len(), phi.n())));
    }
    let pw = power_table(z, phi.degree());
    let mut out = CMat::zeros(phi.rows, phi.cols);
    for (k, m) in &phi.terms {
        let mono: C64 = k.entries().iter().enumerate().map(|(i, &e)| pw[i][e as usize]).product();
        out += m * mono;
    }
    Ok(out)
}

/// `M_Phi h`; exact polynomial product in the window of degree `d_Phi + d_h`.
pub fn apply_symbol(phi: &OperatorSymbol, h: &HardyElement) -> Result<HardyElement> {
    if phi.cols != h.dim {
        return Err(Error::ShapeMismatch(format!("symbol has {} columns, element dimension {}", phi.cols, h.dim)));
    }
    let m = assemble_mult_matrix(phi, h.window())?;
    let out_w = h.window.with_degree(h.window.d() + phi.window.d())?;
    HardyElement::from_coeffs(&out_w, phi.rows, m.mul_vec(&h.coeffs))
}

/// Matrix of `M_Phi` from the monomial basis of `(in_window, C^cols)` to the
/// monomial basis of the window of degree `in_window.d + Phi.d` with `C^rows`.
pub fn assemble_mult_matrix(phi: &OperatorSymbol, in_window: &DegreeWindow) -> Result<SparseMat> {
    let out_w = in_window.with_degree(in_window.d() + phi.window.d())?;
    assemble_into(phi, in_window, &out_w)
}

/// Matrix of `M_Phi` on one window, products truncated back to that window.
pub fn assemble_truncated_mult_matrix(phi: &OperatorSymbol, window: &DegreeWindow) -> Result<SparseMat> {
    assemble_into(phi, window, window)
}

fn assemble_into(phi: &OperatorSymbol, in_w: &DegreeWindow, out_w: &DegreeWindow) -> Result<SparseMat> {
    if in_w.n() != phi.n() {
        return Err(Error::ShapeMismatch(format!("window has {} variables, symbol {}", in_w.n(), phi.n())));
    }
    let (rows, cols) = (phi.rows, phi.cols);
    let mut k = vec![0u32; in_w.n()];
    let mut columns: Vec<Vec<(usize, C64)>> = Vec::with_capacity(in_w.len() * cols);
    for src in in_w.multi_indices() {
        let targets: Vec<(usize, &CMat)> = phi
            .terms
            .iter()
            .filter_map(|(kt, m)| {
                for (slot, (a, b)) in k.iter_mut().zip(src.entries().iter().zip(kt.entries())) {
                    *slot = a + b;
                }
                out_w.position_of(&k).map(|q| (q, m))
            })
            .collect();
        for c in 0..cols {
            let mut col = Vec::with_capacity(targets.len() * rows);
            for &(q, m) in &targets {
                for r in 0..rows {
                    let v = m[(r, c)];
                    if v != ZERO {
                        col.push((q * rows + r, v));
                    }
                }
            }
            columns.push(col);
        }
    }
    Ok(SparseMat::from_columns(out_w.len() * rows, columns))
}

/// Degree-`d` Taylor truncation of `exp(c z_i)` as a scalar symbol in `n`
/// variables (zero-based `i`).
pub fn exp_monomial_symbol(n: usize, i: usize, c: C64, d: u32) -> Result<OperatorSymbol> {
    check_var(i, n)?;
    let window = DegreeWindow::new(n, d)?;
    let mut s = OperatorSymbol::zero(&window, 1, 1);
    let mut coef = ONE;
    for k in 0..=d {
        if k > 0 {
            coef = coef * c / k as f64;
        }
        let mut idx = vec![0u32; n];
        idx[i] = k;
        s.add_term(&MultiIndex(idx), &CMat::from_element(1, 1, coef))?;
    }
    Ok(s)
}
