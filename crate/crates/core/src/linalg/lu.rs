use super::ordering::{invert, reverse_cuthill_mckee};
use super::{check_finite, CsrMatrix, DenseVector, LinalgError};

/// Band LU factorization with partial pivoting of an RCM-permuted matrix.
///
/// Storage follows the LAPACK `gbtrf` layout: row `i` keeps columns `i-kl ..= i+ku+kl`,
/// the extra `kl` super-diagonals absorbing fill from row interchanges. Multipliers stay in
/// the rows where they were computed, so interchanges are replayed during the solves.
pub struct LuFactor {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    perm: Vec<usize>,
    pivots: Vec<usize>,
    band: Vec<f64>,
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self, LinalgError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinalgError::Dimension("LU needs a square matrix".into()));
        }
        let perm = reverse_cuthill_mckee(&a.symmetric_pattern());
        let inv = invert(&perm);
        let (mut kl, mut ku) = (0usize, 0usize);
        let mut scale = 0.0f64;
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, v) in a.row(old_i) {
                let j = inv[old_j];
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
                scale = scale.max(v.abs());
            }
        }
        let width = 2 * kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, v) in a.row(old_i) {
                let j = inv[old_j];
                band[i * width + j + kl - i] += v;
            }
        }
        let tiny = scale * 1e-14;
        let at = |i: usize, j: usize| i * width + j + kl - i;
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = band[at(k, k)].abs();
            for i in k + 1..=last_row {
                let v = band[at(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(LinalgError::Singular(perm[k]));
            }
            pivots[k] = p;
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    band.swap(at(k, j), at(p, j));
                }
            }
            let d = band[at(k, k)];
            for i in k + 1..=last_row {
                let l = band[at(i, k)] / d;
                band[at(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        band[at(i, j)] -= l * band[at(k, j)];
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, width, perm, pivots, band })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.band[i * self.width + j + self.kl - i]
    }

    /// Solves `A x = b`, or `A^T x = b` when `transpose` is set.
    pub fn solve(&self, b: &[f64], transpose: bool) -> Result<DenseVector, LinalgError> {
        let n = self.n;
        if b.len() != n {
            return Err(LinalgError::Dimension("LU rhs size".into()));
        }
        let (kl, ku) = (self.kl, self.ku);
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        if !transpose {
            for k in 0..n {
                let p = self.pivots[k];
                if p != k {
                    y.swap(k, p);
                }
                let yk = y[k];
                if yk != 0.0 {
                    for i in k + 1..=(k + kl).min(n - 1) {
                        y[i] -= self.at(i, k) * yk;
                    }
                }
            }
            for i in (0..n).rev() {
                let mut s = y[i];
                for j in i + 1..=(i + ku + kl).min(n - 1) {
                    s -= self.at(i, j) * y[j];
                }
                y[i] = s / self.at(i, i);
            }
        } else {
            // U^T w = c
            for i in 0..n {
                let mut s = y[i];
                for j in i.saturating_sub(ku + kl)..i {
                    s -= self.at(j, i) * y[j];
                }
                y[i] = s / self.at(i, i);
            }
            for k in (0..n).rev() {
                let mut s = 0.0;
                for i in k + 1..=(k + kl).min(n - 1) {
                    s += self.at(i, k) * y[i];
                }
                y[k] -= s;
                let p = self.pivots[k];
                if p != k {
                    y.swap(k, p);
                }
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        check_finite(&x)?;
        Ok(x)
    }
}

/// Solves the general square system `A x = b` (or `A^T x = b`).
pub fn lu_solve(a: &CsrMatrix, b: &[f64], transpose: bool) -> Result<DenseVector, LinalgError> {
    LuFactor::new(a)?.solve(b, transpose)
}
