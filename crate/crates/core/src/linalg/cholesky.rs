use super::ordering::{invert, reverse_cuthill_mckee};
use super::{check_finite, CsrMatrix, DenseVector, LinalgError};

/// Profile (skyline) Cholesky factor `P A P^T = L L^T` under an RCM permutation.
pub struct CholeskyFactor {
    n: usize,
    perm: Vec<usize>,
    /// first stored column of each row of L
    first: Vec<usize>,
    /// offset of row i inside `data`; row i holds columns first[i]..=i
    start: Vec<usize>,
    data: Vec<f64>,
}

impl CholeskyFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self, LinalgError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(LinalgError::Dimension("Cholesky needs a square matrix".into()));
        }
        let asym = a.asymmetry();
        if asym > 1e-10 {
            return Err(LinalgError::NotSymmetric(asym));
        }
        let perm = reverse_cuthill_mckee(&a.symmetric_pattern());
        let inv = invert(&perm);

        let mut first: Vec<usize> = (0..n).collect();
        for (old_i, &i) in inv.iter().enumerate() {
            for (old_j, _) in a.row(old_i) {
                let j = inv[old_j];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0usize;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut data = vec![0.0; total];
        for (old_i, &i) in inv.iter().enumerate() {
            for (old_j, v) in a.row(old_i) {
                let j = inv[old_j];
                if j <= i {
                    data[start[i] + j - first[i]] += v;
                }
            }
        }

        // row-oriented (bordering) factorization
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = data[start[i] + j - fi];
                let ri = &data[start[i] + lo - fi..start[i] + j - fi];
                let rj = &data[start[j] + lo - fj..start[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(x, y)| x * y).sum::<f64>();
                if j == i {
                    if !(s > 0.0) {
                        return Err(LinalgError::NotPositiveDefinite { row: perm[i], value: s });
                    }
                    data[start[i] + i - fi] = s.sqrt();
                } else {
                    data[start[i] + j - fi] = s / data[start[j] + j - fj];
                }
            }
        }
        Ok(Self { n, perm, first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<DenseVector, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::Dimension("Cholesky rhs size".into()));
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        // L y = Pb
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        // L^T x = y, column sweep
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * yi;
            }
        }
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        check_finite(&x)?;
        Ok(x)
    }
}

/// Solves the symmetric positive definite system `A x = b`.
pub fn cholesky_solve(a: &CsrMatrix, b: &[f64]) -> Result<DenseVector, LinalgError> {
    CholeskyFactor::new(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;

    #[test]
    fn identity_returns_rhs() {
        let x = cholesky_solve(&CsrMatrix::identity(3), &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn two_by_two_hand_solve() {
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let x = cholesky_solve(&a, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_and_unsymmetric() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky_solve(&a, &[1.0, 1.0]), Err(LinalgError::NotPositiveDefinite { .. })));
        let b = CsrMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(cholesky_solve(&b, &[1.0, 1.0]), Err(LinalgError::NotSymmetric(_))));
    }

    #[test]
    fn laplacian_residual() {
        let n = 50;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.5));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -1.0));
            }
            if i + 7 < n {
                trip.push((i, i + 7, -0.2));
                trip.push((i + 7, i, -0.2));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &trip).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = cholesky_solve(&a, &b).unwrap();
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) <= 1e-10 * norm2(&b));
    }
}
