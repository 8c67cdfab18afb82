use super::{dot, norm2, CsrMatrix, DenseVector, LinalgError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for SPD systems.
pub fn cg_solve(
    a: &CsrMatrix,
    b: &[f64],
    tol: f64,
    maxit: usize,
) -> Result<(DenseVector, CgStats), LinalgError> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(LinalgError::Dimension("cg_solve sizes".into()));
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, CgStats { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d != 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=maxit {
        let ap = a.mul_vec(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / bnorm;
        if rel <= tol {
            return Ok((x, CgStats { iterations: it, relative_residual: rel }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(LinalgError::NoConvergence { iterations: maxit, residual: norm2(&r) / bnorm })
}
