//! Sparse matrices and the direct/iterative solvers used by every solve in the crate.
//!
//! Direct solvers reorder with reverse Cuthill-McKee and factor in profile (Cholesky) or
//! band (LU with partial pivoting) storage.

mod cg;
mod cholesky;
mod lu;
mod ordering;

use std::fmt::Write as _;

use thiserror::Error;

pub use cg::{cg_solve, CgStats};
pub use cholesky::{cholesky_solve, CholeskyFactor};
pub use lu::{lu_solve, LuFactor};
pub use ordering::reverse_cuthill_mckee;

/// Contiguous real vector; the currency of assembly and solves.
pub type DenseVector = Vec<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("non-positive pivot {value:.3e} at row {row}: matrix is not positive definite")]
    NotPositiveDefinite { row: usize, value: f64 },
    #[error("singular matrix: zero pivot in column {0}")]
    Singular(usize),
    #[error("non-finite entry in solution")]
    NonFinite,
    #[error("conjugate gradients did not converge in {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from (row, col, value) triplets. Duplicates are summed in the order
    /// they appear, so the result only depends on the triplet order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, LinalgError> {
        if nrows == 0 || ncols == 0 {
            return Err(LinalgError::Dimension("matrix dimensions must be positive".into()));
        }
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::Dimension(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, keeping insertion order
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for r in 0..nrows {
            let (lo, hi) = (counts[r], counts[r + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&k| cols[k]);
            let mut last: Option<usize> = None;
            for &k in &order {
                if last == Some(cols[k]) {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                    last = Some(cols[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self { nrows, ncols, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        let trip: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &trip).expect("identity of positive size")
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut trip = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(LinalgError::Dimension("ragged dense input".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(nrows, ncols, &trip)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterator over the stored (column, value) pairs of one row.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> DenseVector {
        assert_eq!(x.len(), self.ncols, "mul_vec dimension");
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn mul_vec_transpose(&self, x: &[f64]) -> DenseVector {
        assert_eq!(x.len(), self.nrows, "mul_vec_transpose dimension");
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, v) in self.row(i) {
                y[j] += v * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                trip.push((j, i, v));
            }
        }
        CsrMatrix::from_triplets(self.ncols, self.nrows, &trip).expect("transpose keeps dims")
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    pub fn scale(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &CsrMatrix, s: f64) -> Result<CsrMatrix, LinalgError> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(LinalgError::Dimension("add of differently sized matrices".into()));
        }
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            trip.extend(self.row(i).map(|(j, v)| (i, j, v)));
            trip.extend(other.row(i).map(|(j, v)| (i, j, s * v)));
        }
        CsrMatrix::from_triplets(self.nrows, self.ncols, &trip)
    }

    /// Largest |a_ij - a_ji| relative to the largest |a_ij|.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.asymmetry() <= rel_tol
    }

    /// Principal submatrix on the listed indices (in the given order).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<CsrMatrix, LinalgError> {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut trip = Vec::new();
        for (ki, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                let kj = col_map[j];
                if kj != usize::MAX {
                    trip.push((ki, kj, v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), &trip)
    }

    /// Symmetrized adjacency (pattern of A + A^T without the diagonal).
    pub(crate) fn symmetric_pattern(&self) -> Vec<Vec<usize>> {
        let n = self.nrows;
        let mut adj = vec![Vec::new(); n];
        for i in 0..n {
            for (j, _) in self.row(i) {
                if i != j {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// MatrixMarket coordinate format (general, real).
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::from("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
            }
        }
        s
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn check_finite(x: &[f64]) -> Result<(), LinalgError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(LinalgError::NonFinite)
    }
}

/// Solves the sub-system on `free` dofs; constrained entries of the result are zero.
///
/// Symmetric matrices go through Cholesky first and fall back to LU when the free block is
/// indefinite; everything else goes straight to LU. With `transpose` set, `A^T x = b` is
/// solved instead.
pub fn solve_dirichlet(
    a: &CsrMatrix,
    b: &[f64],
    free: &[bool],
    transpose: bool,
) -> Result<DenseVector, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n || free.len() != n {
        return Err(LinalgError::Dimension(format!(
            "solve_dirichlet: matrix {}x{}, rhs {}, mask {}",
            a.nrows(),
            a.ncols(),
            b.len(),
            free.len()
        )));
    }
    let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
    let mut x = vec![0.0; n];
    if idx.is_empty() {
        return Ok(x);
    }
    let sub = a.submatrix(&idx, &idx)?;
    let rhs: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
    let y = if sub.is_symmetric(1e-12) {
        match CholeskyFactor::new(&sub) {
            Ok(f) => f.solve(&rhs)?,
            Err(LinalgError::NotPositiveDefinite { .. }) => LuFactor::new(&sub)?.solve(&rhs, false)?,
            Err(e) => return Err(e),
        }
    } else {
        LuFactor::new(&sub)?.solve(&rhs, transpose)?
    };
    for (k, &i) in idx.iter().enumerate() {
        x[i] = y[k];
    }
    Ok(x)
}

/// A factorization of the free block of a matrix that can be reused for several right-hand
/// sides, in plain and transposed form.
pub struct DirichletSolver {
    idx: Vec<usize>,
    n: usize,
    factor: Factor,
}

enum Factor {
    Empty,
    Cholesky(CholeskyFactor),
    Lu(LuFactor),
}

impl DirichletSolver {
    pub fn new(a: &CsrMatrix, free: &[bool]) -> Result<Self, LinalgError> {
        let n = a.nrows();
        if a.ncols() != n || free.len() != n {
            return Err(LinalgError::Dimension("DirichletSolver: non-square or mask size".into()));
        }
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        if idx.is_empty() {
            return Ok(Self { idx, n, factor: Factor::Empty });
        }
        let sub = a.submatrix(&idx, &idx)?;
        let factor = if sub.is_symmetric(1e-12) {
            match CholeskyFactor::new(&sub) {
                Ok(f) => Factor::Cholesky(f),
                Err(LinalgError::NotPositiveDefinite { .. }) => Factor::Lu(LuFactor::new(&sub)?),
                Err(e) => return Err(e),
            }
        } else {
            Factor::Lu(LuFactor::new(&sub)?)
        };
        Ok(Self { idx, n, factor })
    }

    pub fn solve(&self, b: &[f64], transpose: bool) -> Result<DenseVector, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::Dimension("DirichletSolver rhs size".into()));
        }
        let rhs: Vec<f64> = self.idx.iter().map(|&i| b[i]).collect();
        let y = match &self.factor {
            Factor::Empty => Vec::new(),
            Factor::Cholesky(f) => f.solve(&rhs)?,
            Factor::Lu(f) => f.solve(&rhs, transpose)?,
        };
        let mut x = vec![0.0; self.n];
        for (k, &i) in self.idx.iter().enumerate() {
            x[i] = y[k];
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let a = CsrMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, 5.0)])
            .unwrap();
        assert_eq!(a.col_idx(), &[0, 2, 1]);
        assert_eq!(a.get(0, 2), 4.0);
        assert_eq!(a.get(1, 0), 0.0);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 1.0]), vec![6.0, 5.0]);
        assert_eq!(a.mul_vec_transpose(&[1.0, 2.0]), vec![2.0, 10.0, 4.0]);
    }

    #[test]
    fn out_of_range_triplet_is_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
        assert!(CsrMatrix::from_triplets(0, 2, &[]).is_err());
    }

    #[test]
    fn dirichlet_identity_restricts_rhs() {
        let a = CsrMatrix::identity(4);
        let x = solve_dirichlet(&a, &[1.0, 2.0, 3.0, 4.0], &[true, false, true, false], false)
            .unwrap();
        assert_eq!(x, vec![1.0, 0.0, 3.0, 0.0]);
    }

    #[test]
    fn dirichlet_transpose_flag_is_noop_for_symmetric() {
        let a = CsrMatrix::from_dense(&[
            vec![4.0, 1.0, 0.0],
            vec![1.0, 3.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ])
        .unwrap();
        let b = [1.0, -2.0, 0.5];
        let mask = [true; 3];
        let x0 = solve_dirichlet(&a, &b, &mask, false).unwrap();
        let x1 = solve_dirichlet(&a, &b, &mask, true).unwrap();
        for (p, q) in x0.iter().zip(&x1) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_unsymmetric_transpose() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![0.0, 3.0]]).unwrap();
        let x = solve_dirichlet(&a, &[2.0, 3.0], &[true, true], true).unwrap();
        // A^T x = b  ->  [2 0; 1 3] x = (2, 3)
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn matrix_market_header() {
        let s = CsrMatrix::identity(2).to_matrix_market();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general\n2 2 2\n"));
    }
}
