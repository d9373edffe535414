//! Column-sparse complex matrices and block-decomposed spectral routines.
//!
//! Every matrix in this crate is a coefficient-space operator between monomial
//! bases, and most of them are extremely sparse: multiplication by a symbol only
//! couples monomials that differ by one of the symbol's exponents. The spectral
//! routines below exploit that by splitting a matrix into the connected
//! components of its sparsity graph (a symmetric row/column permutation to block
//! diagonal form) and running a dense nalgebra decomposition on each block.
//! The result is identical to the dense decomposition up to rounding, but the
//! cost is governed by the largest block rather than the ambient dimension.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Compressed sparse column matrix over `C64`. Row indices in each column are
/// strictly increasing and stored values are never exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMat {
    nrows: usize,
    ncols: usize,
    cols: Vec<Vec<(usize, C64)>>,
}

impl SparseMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, cols: vec![Vec::new(); ncols] }
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, cols: (0..n).map(|j| vec![(j, ONE)]).collect() }
    }

    /// Builds a matrix from unsorted column entry lists; duplicates are summed.
    pub fn from_columns(nrows: usize, cols: Vec<Vec<(usize, C64)>>) -> Self {
        let ncols = cols.len();
        let cols = cols
            .into_iter()
            .map(|mut c| {
                c.sort_by_key(|&(r, _)| r);
                let mut out: Vec<(usize, C64)> = Vec::with_capacity(c.len());
                for (r, v) in c {
                    assert!(r < nrows, "row index {r} out of bounds for {nrows} rows");
                    match out.last_mut() {
                        Some(last) if last.0 == r => last.1 += v,
                        _ => out.push((r, v)),
                    }
                }
                out.retain(|&(_, v)| v != ZERO);
                out
            })
            .collect();
        Self { nrows, ncols, cols }
    }

    pub fn from_dense_columns(nrows: usize, cols: &[Vec<C64>]) -> Self {
        let cols = cols
            .iter()
            .map(|c| {
                debug_assert_eq!(c.len(), nrows);
                c.iter().enumerate().filter(|(_, v)| **v != ZERO).map(|(r, v)| (r, *v)).collect()
            })
            .collect::<Vec<_>>();
        Self { nrows, ncols: cols.len(), cols }
    }

    pub fn from_dense(m: &CMat) -> Self {
        let cols = (0..m.ncols())
            .map(|j| {
                (0..m.nrows())
                    .filter_map(|i| {
                        let v = m[(i, j)];
                        (v != ZERO).then_some((i, v))
                    })
                    .collect()
            })
            .collect();
        Self { nrows: m.nrows(), ncols: m.ncols(), cols }
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn col(&self, j: usize) -> &[(usize, C64)] {
        &self.cols[j]
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn column_dense(&self, j: usize) -> Vec<C64> {
        let mut v = vec![ZERO; self.nrows];
        for &(i, x) in &self.cols[j] {
            v[i] = x;
        }
        v
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match self.cols[j].binary_search_by_key(&i, |&(r, _)| r) {
            Ok(p) => self.cols[j][p].1,
            Err(_) => ZERO,
        }
    }

    pub fn adjoint(&self) -> SparseMat {
        let mut cols = vec![Vec::new(); self.nrows];
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                cols[i].push((j, v.conj()));
            }
        }
        // columns of the adjoint are filled in increasing j, so already sorted
        Self { nrows: self.ncols, ncols: self.nrows, cols }
    }

    pub fn matmul(&self, rhs: &SparseMat) -> SparseMat {
        assert_eq!(self.ncols, rhs.nrows, "inner dimensions differ");
        let mut work = vec![ZERO; self.nrows];
        let mut mark = vec![false; self.nrows];
        let mut touched = Vec::new();
        let cols = rhs
            .cols
            .iter()
            .map(|rcol| {
                for &(k, b) in rcol {
                    for &(i, a) in &self.cols[k] {
                        if !mark[i] {
                            mark[i] = true;
                            touched.push(i);
                        }
                        work[i] += a * b;
                    }
                }
                touched.sort_unstable();
                let mut out = Vec::with_capacity(touched.len());
                for &i in &touched {
                    if work[i] != ZERO {
                        out.push((i, work[i]));
                    }
                    work[i] = ZERO;
                    mark[i] = false;
                }
                touched.clear();
                out
            })
            .collect();
        Self { nrows: self.nrows, ncols: rhs.ncols, cols }
    }

    /// `alpha * self + beta * other`.
    pub fn lin_comb(&self, alpha: C64, other: &SparseMat, beta: C64) -> SparseMat {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols), "shape mismatch");
        let cols = self
            .cols
            .iter()
            .zip(&other.cols)
            .map(|(a, b)| {
                let mut out = Vec::with_capacity(a.len() + b.len());
                let (mut p, mut q) = (0, 0);
                while p < a.len() || q < b.len() {
                    let entry = match (a.get(p), b.get(q)) {
                        (Some(&(i, x)), Some(&(k, _))) if i < k => {
                            p += 1;
                            (i, alpha * x)
                        }
                        (Some(&(i, _)), Some(&(k, y))) if k < i => {
                            q += 1;
                            (k, beta * y)
                        }
                        (Some(&(i, x)), Some(&(_, y))) => {
                            p += 1;
                            q += 1;
                            (i, alpha * x + beta * y)
                        }
                        (Some(&(i, x)), None) => {
                            p += 1;
                            (i, alpha * x)
                        }
                        (None, Some(&(k, y))) => {
                            q += 1;
                            (k, beta * y)
                        }
                        (None, None) => unreachable!(),
                    };
                    if entry.1 != ZERO {
                        out.push(entry);
                    }
                }
                out
            })
            .collect();
        Self { nrows: self.nrows, ncols: self.ncols, cols }
    }

    pub fn sub(&self, other: &SparseMat) -> SparseMat {
        self.lin_comb(ONE, other, -ONE)
    }

    pub fn add(&self, other: &SparseMat) -> SparseMat {
        self.lin_comb(ONE, other, ONE)
    }

    pub fn scale(&self, alpha: C64) -> SparseMat {
        self.lin_comb(alpha, &SparseMat::zeros(self.nrows, self.ncols), ZERO)
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![ZERO; self.nrows];
        for (j, col) in self.cols.iter().enumerate() {
            if x[j] == ZERO {
                continue;
            }
            for &(i, a) in col {
                y[i] += a * x[j];
            }
        }
        y
    }

    /// `self^H x`
    pub fn adjoint_mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows);
        self.cols.iter().map(|col| col.iter().map(|&(i, a)| a.conj() * x[i]).sum()).collect()
    }

    /// Keeps the rows flagged in `keep`, renumbering them in order.
    pub fn select_rows(&self, keep: &[bool]) -> SparseMat {
        assert_eq!(keep.len(), self.nrows);
        let mut map = vec![usize::MAX; self.nrows];
        let mut next = 0;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                map[i] = next;
                next += 1;
            }
        }
        let cols = self
            .cols
            .iter()
            .map(|c| c.iter().filter(|(i, _)| keep[*i]).map(|&(i, v)| (map[i], v)).collect())
            .collect();
        Self { nrows: next, ncols: self.ncols, cols }
    }

    pub fn select_cols(&self, idx: &[usize]) -> SparseMat {
        Self { nrows: self.nrows, ncols: idx.len(), cols: idx.iter().map(|&j| self.cols[j].clone()).collect() }
    }

    pub fn hcat(&self, other: &SparseMat) -> SparseMat {
        assert_eq!(self.nrows, other.nrows);
        let mut cols = self.cols.clone();
        cols.extend(other.cols.iter().cloned());
        Self { nrows: self.nrows, ncols: self.ncols + other.ncols, cols }
    }

    pub fn push_column(&mut self, col: Vec<(usize, C64)>) {
        let m = SparseMat::from_columns(self.nrows, vec![col]);
        self.cols.extend(m.cols);
        self.ncols += 1;
    }

    /// Drops entries with modulus at or below `tol`.
    pub fn pruned(&self, tol: f64) -> SparseMat {
        let cols = self.cols.iter().map(|c| c.iter().copied().filter(|(_, v)| v.norm() > tol).collect()).collect();
        Self { nrows: self.nrows, ncols: self.ncols, cols }
    }

    pub fn max_abs(&self) -> f64 {
        self.cols.iter().flatten().map(|(_, v)| v.norm()).fold(0.0, f64::max)
    }

    pub fn col_norm(&self, j: usize) -> f64 {
        self.cols[j].iter().map(|(_, v)| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum entrywise deviation from the identity (square matrices).
    pub fn identity_deviation(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let mut dev: f64 = 0.0;
        for (j, col) in self.cols.iter().enumerate() {
            let mut diag_seen = false;
            for &(i, v) in col {
                if i == j {
                    diag_seen = true;
                    dev = dev.max((v - ONE).norm());
                } else {
                    dev = dev.max(v.norm());
                }
            }
            if !diag_seen {
                dev = dev.max(1.0);
            }
        }
        dev
    }

    /// Connected components of the bipartite row/column sparsity graph.
    pub(crate) fn blocks(&self) -> Vec<Block> {
        let mut uf = UnionFind::new(self.nrows + self.ncols);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, _) in col {
                uf.union(i, self.nrows + j);
            }
        }
        collect_blocks(&mut uf, self.nrows, self.ncols)
    }

    /// Components of the symmetric graph on `0..n` of a square matrix.
    fn square_blocks(&self) -> Vec<Vec<usize>> {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let mut uf = UnionFind::new(n);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, _) in col {
                uf.union(i, j);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for i in 0..n {
            let r = uf.find(i);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(i);
        }
        groups
    }

    fn dense_block(&self, rows: &[usize], cols: &[usize], local_row: &[usize]) -> CMat {
        let mut m = CMat::zeros(rows.len(), cols.len());
        for (lj, &j) in cols.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                m[(local_row[i], lj)] = v;
            }
        }
        m
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Block {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so block order is a function of the pattern only
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn collect_blocks(uf: &mut UnionFind, nrows: usize, ncols: usize) -> Vec<Block> {
    let mut slot = vec![usize::MAX; nrows + ncols];
    let mut blocks: Vec<Block> = Vec::new();
    for node in 0..nrows + ncols {
        let r = uf.find(node);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Block { rows: Vec::new(), cols: Vec::new() });
        }
        let b = &mut blocks[slot[r]];
        if node < nrows {
            b.rows.push(node);
        } else {
            b.cols.push(node - nrows);
        }
    }
    blocks
}

/// Singular value decomposition of one block. `v` always holds a full set of
/// right singular vectors (one per block column); `sigma[k]` pairs with column
/// `k` of `v`, and trailing columns without a partner have singular value zero.
pub(crate) struct BlockSvd {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub dense: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

impl BlockSvd {
    fn sigma_at(&self, k: usize) -> f64 {
        self.sigma.get(k).copied().unwrap_or(0.0)
    }
}

pub(crate) fn block_svds(a: &SparseMat) -> Vec<BlockSvd> {
    let blocks = a.blocks();
    let mut local_row = vec![0usize; a.nrows];
    for b in &blocks {
        for (l, &i) in b.rows.iter().enumerate() {
            local_row[i] = l;
        }
    }
    blocks
        .into_iter()
        .filter(|b| !b.cols.is_empty())
        .map(|b| {
            let dense = a.dense_block(&b.rows, &b.cols, &local_row);
            let (sigma, v) = dense_svd_full_v(&dense);
            BlockSvd { rows: b.rows, cols: b.cols, dense, sigma, v }
        })
        .collect()
}

/// Singular values and a full right singular basis of a dense matrix.
pub fn dense_svd_full_v(m: &CMat) -> (Vec<f64>, CMat) {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return (Vec::new(), CMat::identity(c, c));
    }
    let padded;
    let work = if r < c {
        padded = {
            let mut p = CMat::zeros(c, c);
            p.view_mut((0, 0), (r, c)).copy_from(m);
            p
        };
        &padded
    } else {
        m
    };
    let svd = work.clone().svd(false, true);
    let v = svd.v_t.expect("requested V").adjoint();
    let mut sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    sigma.truncate(r.min(c));
    (sigma, v)
}

/// Largest singular value of a dense matrix.
pub fn dense_spectral_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

fn global_sigma_max(svds: &[BlockSvd]) -> f64 {
    svds.iter().flat_map(|b| b.sigma.iter().copied()).fold(0.0, f64::max)
}

/// Orthonormal basis of the column space; singular values at or below
/// `rel_tol * sigma_max` are treated as zero.
pub fn column_space(a: &SparseMat, rel_tol: f64) -> SparseMat {
    let svds = block_svds(a);
    let cut = rel_tol * global_sigma_max(&svds);
    let mut out = SparseMat::zeros(a.nrows, 0);
    for b in &svds {
        let keep: Vec<usize> = (0..b.v.ncols()).filter(|&k| b.sigma_at(k) > cut && b.sigma_at(k) > 0.0).collect();
        if keep.is_empty() {
            continue;
        }
        let mut u = &b.dense * b.v.select_columns(&keep);
        for (c, &k) in keep.iter().enumerate() {
            u.column_mut(c).unscale_mut(b.sigma_at(k));
        }
        // A v / sigma drifts off orthogonality when sigma is small next to
        // sigma_max; one QR pass restores it without moving the span.
        let q = u.qr().q();
        for c in 0..keep.len() {
            out.push_column(b.rows.iter().zip(q.column(c).iter()).map(|(&i, &x)| (i, x)).collect());
        }
    }
    out
}

/// Orthonormal basis of the null space, with the same cutoff convention as
/// [`column_space`]. Columns with no entries are null vectors on their own.
pub fn null_space(a: &SparseMat, rel_tol: f64) -> SparseMat {
    let svds = block_svds(a);
    let cut = rel_tol * global_sigma_max(&svds);
    null_space_from(a, &svds, cut)
}

/// Null space with an absolute singular value cutoff.
pub fn null_space_abs(a: &SparseMat, abs_tol: f64) -> SparseMat {
    let svds = block_svds(a);
    null_space_from(a, &svds, abs_tol)
}

fn null_space_from(a: &SparseMat, svds: &[BlockSvd], cut: f64) -> SparseMat {
    let mut out = SparseMat::zeros(a.ncols, 0);
    for b in svds {
        for k in 0..b.v.ncols() {
            if b.sigma_at(k) > cut {
                continue;
            }
            out.push_column(b.cols.iter().zip(b.v.column(k).iter()).map(|(&j, &x)| (j, x)).collect());
        }
    }
    out
}

/// Operator 2-norm together with a unit input vector attaining it.
pub fn spectral_norm_with_witness(a: &SparseMat) -> (f64, Vec<(usize, C64)>) {
    let mut best = (0.0, Vec::new());
    for b in block_svds(a) {
        if let Some(k) = (0..b.sigma.len()).max_by(|&x, &y| b.sigma[x].total_cmp(&b.sigma[y]).then(y.cmp(&x))) {
            if b.sigma[k] > best.0 {
                best = (b.sigma[k], b.cols.iter().zip(b.v.column(k).iter()).map(|(&j, &x)| (j, x)).collect());
            }
        }
    }
    best
}

pub fn spectral_norm(a: &SparseMat) -> f64 {
    spectral_norm_with_witness(a).0
}

/// Eigenpairs of a Hermitian matrix, block by block. Returns the eigenvalues and
/// the eigenvectors (as columns) for which `keep(lambda)` holds.
pub fn hermitian_eigen_filtered(a: &SparseMat, keep: impl Fn(f64) -> bool) -> (Vec<f64>, SparseMat) {
    let n = a.nrows;
    let groups = a.square_blocks();
    let mut local = vec![0usize; n];
    for g in &groups {
        for (l, &i) in g.iter().enumerate() {
            local[i] = l;
        }
    }
    let mut values = Vec::new();
    let mut out = SparseMat::zeros(n, 0);
    for g in &groups {
        let dense = a.dense_block(g, g, &local);
        let eig = SymmetricEigen::new(dense);
        for k in 0..g.len() {
            let lambda = eig.eigenvalues[k];
            if keep(lambda) {
                values.push(lambda);
                out.push_column(g.iter().zip(eig.eigenvectors.column(k).iter()).map(|(&i, &x)| (i, x)).collect());
            }
        }
    }
    (values, out)
}

/// Minimum-norm least-squares solution of `a x = b` for each column of `b`,
/// with the singular value cutoff `rel_tol * sigma_max`. Returns the solution
/// and the Euclidean residual of each column.
pub fn least_squares(a: &SparseMat, b: &SparseMat, rel_tol: f64) -> (SparseMat, Vec<f64>) {
    assert_eq!(a.nrows, b.nrows);
    let svds = block_svds(a);
    let cut = rel_tol * global_sigma_max(&svds);
    let mut sols = Vec::with_capacity(b.ncols);
    let mut residuals = Vec::with_capacity(b.ncols);
    for j in 0..b.ncols {
        let rhs = b.column_dense(j);
        let mut x = vec![ZERO; a.ncols];
        for blk in &svds {
            if blk.rows.is_empty() {
                continue;
            }
            let rb = nalgebra::DVector::from_iterator(blk.rows.len(), blk.rows.iter().map(|&i| rhs[i]));
            if rb.iter().all(|v| *v == ZERO) {
                continue;
            }
            // x = sum_k v_k (u_k^H b) / sigma_k with u_k = A v_k / sigma_k
            let atb = blk.dense.adjoint() * rb;
            for k in 0..blk.v.ncols() {
                let s = blk.sigma_at(k);
                if s <= cut || s == 0.0 {
                    continue;
                }
                let vk = blk.v.column(k);
                let coef = vk.dotc(&atb) / C64::new(s * s, 0.0);
                for (l, &jj) in blk.cols.iter().enumerate() {
                    x[jj] += vk[l] * coef;
                }
            }
        }
        let ax = a.mul_vec(&x);
        let res = ax.iter().zip(&rhs).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
        residuals.push(res);
        sols.push(x);
    }
    (SparseMat::from_dense_columns(a.ncols, &sols), residuals)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
