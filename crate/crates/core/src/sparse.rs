//! Compressed-row sparse matrices, ILU(0) and restarted GMRES.
//!
//! Only what the solver needs: triplet/row assembly, row-parallel
//! matrix–vector products, linear combinations, sparse products for the
//! explicit step operators, a right-preconditioned Krylov solve, and a
//! sparse direct fallback.

use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::linalg::solvers::SolveCore;
use faer::{Conj, Mat};

use crate::par;

/// Real sparse matrix in CSR form with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
}

/// Anything that can be applied to a vector.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![1.0; n],
        }
    }

    /// Build from per-row `(column, value)` lists. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                assert!(col < ncols, "column {col} out of range {ncols}");
                let mut v = 0.0;
                while k < row.len() && row[k].0 == col {
                    v += row[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    indices.push(col);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        Self::from_rows(ncols, rows)
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Self {
        let ncols = dense.first().map_or(0, Vec::len);
        let rows = dense
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        Self::from_rows(ncols, rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.data[s..e])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    pub fn max_row_nnz(&self) -> usize {
        (0..self.nrows).map(|i| self.row_nnz(i)).max().unwrap_or(0)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
    }

    /// `y = A x`, row-parallel when the `parallel` feature is on.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        par::fill_indexed(y, |i| self.row_dot(i, x));
    }

    /// `y = A x` on the calling thread only.
    pub fn mul_vec_seq_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row_dot(i, x);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `Σ coeff_k · A_k` over matrices of equal shape.
    pub fn lin_comb(terms: &[(f64, &CsrMatrix)]) -> Self {
        let (nrows, ncols) = terms
            .first()
            .map(|(_, m)| (m.nrows, m.ncols))
            .expect("lin_comb needs at least one term");
        for (_, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nrows, ncols));
        }
        Self::accumulate_rows(nrows, ncols, |i, acc| {
            for (s, m) in terms {
                let (cols, vals) = m.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    acc.add(c, s * v);
                }
            }
        })
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        Self::accumulate_rows(self.nrows, other.ncols, |i, acc| {
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (c2, v2) = other.row(k);
                for (&j, &b) in c2.iter().zip(v2) {
                    acc.add(j, a * b);
                }
            }
        })
    }

    /// Row-by-row construction through a dense accumulator, in parallel
    /// over blocks of rows. Exact zeros are dropped.
    fn accumulate_rows(nrows: usize, ncols: usize, fill: impl Fn(usize, &mut RowAccumulator) + Sync) -> Self {
        const BLOCK: usize = 512;
        let blocks = nrows.div_ceil(BLOCK);
        let parts = par::map_range(blocks, |b| {
            let mut acc = RowAccumulator::new(ncols);
            let mut indptr = Vec::new();
            let mut indices = Vec::new();
            let mut data = Vec::new();
            for i in b * BLOCK..((b + 1) * BLOCK).min(nrows) {
                fill(i, &mut acc);
                acc.drain_into(&mut indices, &mut data);
                indptr.push(indices.len());
            }
            (indptr, indices, data)
        });
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for (p, i, d) in parts {
            let base = indices.len();
            indptr.extend(p.into_iter().map(|k| k + base));
            indices.extend(i);
            data.extend(d);
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    /// Copy of `self` with every row where `mask[i]` is set cleared.
    pub fn with_rows_zeroed(&self, mask: &[bool]) -> Self {
        let rows = (0..self.nrows)
            .map(|i| {
                if mask[i] {
                    Vec::new()
                } else {
                    let (c, v) = self.row(i);
                    c.iter().copied().zip(v.iter().copied()).collect()
                }
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }

    /// Copy of `self` with the masked rows taken from `replacement`.
    pub fn with_rows_replaced(&self, mask: &[bool], replacement: &CsrMatrix) -> Self {
        assert_eq!(replacement.nrows, self.nrows);
        let rows = (0..self.nrows)
            .map(|i| {
                let (c, v) = if mask[i] {
                    replacement.row(i)
                } else {
                    self.row(i)
                };
                c.iter().copied().zip(v.iter().copied()).collect()
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.nrows)
            .map(|i| {
                let mut r = vec![0.0; self.ncols];
                let (c, v) = self.row(i);
                for (&j, &x) in c.iter().zip(v) {
                    r[j] = x;
                }
                r
            })
            .collect()
    }
}

/// Dense scratch row with a list of touched columns.
struct RowAccumulator {
    values: Vec<f64>,
    touched: Vec<bool>,
    cols: Vec<usize>,
}

impl RowAccumulator {
    fn new(ncols: usize) -> Self {
        Self {
            values: vec![0.0; ncols],
            touched: vec![false; ncols],
            cols: Vec::new(),
        }
    }

    fn add(&mut self, col: usize, v: f64) {
        if !self.touched[col] {
            self.touched[col] = true;
            self.cols.push(col);
        }
        self.values[col] += v;
    }

    fn drain_into(&mut self, indices: &mut Vec<usize>, data: &mut Vec<f64>) {
        self.cols.sort_unstable();
        for &c in &self.cols {
            let v = self.values[c];
            if v != 0.0 {
                indices.push(c);
                data.push(v);
            }
            self.values[c] = 0.0;
            self.touched[c] = false;
        }
        self.cols.clear();
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.mul_vec_into(x, y);
    }
}

/// Sparse LU with partial pivoting and fill-reducing ordering.
pub struct SparseLu {
    n: usize,
    lu: Lu<usize, f64>,
}

impl SparseLu {
    /// `None` if the matrix is structurally or numerically singular.
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        assert_eq!(a.nrows, a.ncols, "LU needs a square matrix");
        let mut triplets = Vec::with_capacity(a.nnz());
        for i in 0..a.nrows {
            let (cols, vals) = a.row(i);
            triplets.extend(cols.iter().zip(vals).map(|(&j, &v)| Triplet::new(i, j, v)));
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(a.nrows, a.ncols, &triplets).ok()?;
        let lu = m.sp_lu().ok()?;
        Some(SparseLu { n: a.nrows, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = Mat::from_fn(self.n, 1, |i, _| b[i]);
        self.lu.solve_in_place_with_conj(Conj::No, x.as_mut());
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }
}

/// Incomplete LU factorization with zero fill-in.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

impl Ilu0 {
    /// Factorize `a` on its own sparsity pattern. Missing diagonal entries
    /// are inserted as zeros before factorization; a zero pivot is replaced
    /// by a small multiple of the row norm.
    pub fn new(a: &CsrMatrix) -> Self {
        assert_eq!(a.nrows, a.ncols);
        let n = a.nrows;
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let (c, v) = a.row(i);
                c.iter().copied().zip(v.iter().copied()).collect()
            })
            .collect();
        for (i, row) in rows.iter_mut().enumerate() {
            if !row.iter().any(|&(c, _)| c == i) {
                row.push((i, 0.0));
            }
            row.sort_by_key(|&(c, _)| c);
        }
        // keep explicit zeros on the diagonal, so build by hand
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for row in &rows {
            for &(c, v) in row {
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        let mut lu = CsrMatrix {
            nrows: n,
            ncols: n,
            indptr,
            indices,
            data,
        };
        let diag: Vec<usize> = (0..n)
            .map(|i| {
                let s = lu.indptr[i];
                s + lu.indices[s..lu.indptr[i + 1]]
                    .binary_search(&i)
                    .expect("diagonal present")
            })
            .collect();

        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (s, e) = (lu.indptr[i], lu.indptr[i + 1]);
            let row_norm = lu.data[s..e].iter().map(|v| v.abs()).fold(0.0, f64::max);
            for k in s..e {
                pos[lu.indices[k]] = k;
            }
            for k in s..diag[i] {
                let col = lu.indices[k];
                let pivot = lu.data[diag[col]];
                let factor = lu.data[k] / pivot;
                lu.data[k] = factor;
                for m in (diag[col] + 1)..lu.indptr[col + 1] {
                    let p = pos[lu.indices[m]];
                    if p != usize::MAX {
                        lu.data[p] -= factor * lu.data[m];
                    }
                }
            }
            if lu.data[diag[i]] == 0.0 {
                lu.data[diag[i]] = 1e-8 * row_norm.max(1.0);
            }
            for k in s..e {
                pos[lu.indices[k]] = usize::MAX;
            }
        }
        Self { lu, diag }
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.diag.len();
        let lu = &self.lu;
        for i in 0..n {
            let mut s = r[i];
            for k in lu.indptr[i]..self.diag[i] {
                s -= lu.data[k] * z[lu.indices[k]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (self.diag[i] + 1)..lu.indptr[i + 1] {
                s -= lu.data[k] * z[lu.indices[k]];
            }
            z[i] = s / lu.data[self.diag[i]];
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GmresOptions {
    /// Target relative residual `‖b − A x‖ / ‖b‖`.
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            restart: 60,
            max_iter: 3000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned restarted GMRES. `x` holds the initial guess on
/// entry and the solution on exit.
pub fn gmres<A, P>(op: &A, precond: &P, b: &[f64], x: &mut [f64], opts: GmresOptions) -> SolveStats
where
    A: LinearOperator + ?Sized,
    P: Preconditioner + ?Sized,
{
    let n = op.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return SolveStats {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let m = opts.restart.max(1);
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut total = 0;

    loop {
        op.apply(x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        let beta = norm2(&r);
        let rel = beta / bnorm;
        if rel <= opts.tol || total >= opts.max_iter {
            return SolveStats {
                iterations: total,
                relative_residual: rel,
                converged: rel <= opts.tol,
            };
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            precond.apply(&basis[k], &mut z);
            op.apply(&z, &mut w);
            for (j, vj) in basis.iter().enumerate() {
                let h = dot(&w, vj);
                hess[j][k] = h;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= h * vi);
            }
            let hn = norm2(&w);
            hess[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = hess[k][k] / denom;
                sn[k] = hess[k + 1][k] / denom;
            }
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            if (g[k + 1].abs() / bnorm) <= 0.5 * opts.tol || hn == 0.0 || total >= opts.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        w.iter_mut().for_each(|v| *v = 0.0);
        for (j, yj) in y.iter().enumerate() {
            w.iter_mut().zip(&basis[j]).for_each(|(wi, vi)| *wi += yj * vi);
        }
        precond.apply(&w, &mut z);
        x.iter_mut().zip(&z).for_each(|(xi, zi)| *xi += zi);
    }
}
