//! Dense solvers sized for desk-scale kernel systems.
//!
//! The equilibrium-measure systems are symmetric positive definite with a
//! few hundred to a few thousand unknowns after symmetry reduction, so a
//! plain Cholesky (with LU fallback for the nonsymmetric collocation
//! matrices) and a matrix-free conjugate gradient cover everything.

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub struct Matrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Matrix {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut out = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            let row = &self.data[i * self.n_cols..(i + 1) * self.n_cols];
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        out
    }
}

/// Solve A x = b by LU with partial pivoting. Consumes the matrix.
pub fn solve_lu(mut a: Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n_rows;
    assert_eq!(a.n_cols, n);
    assert_eq!(b.len(), n);
    let mut x: Vec<f64> = b.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        let mut piv = k;
        let mut best = a.at(k, k).abs();
        for i in (k + 1)..n {
            let v = a.at(i, k).abs();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best < 1e-300 {
            return Err(Error::SolverDiverged {
                residual: best,
                iterations: k,
            });
        }
        if piv != k {
            for j in 0..n {
                let t = a.at(k, j);
                a.set(k, j, a.at(piv, j));
                a.set(piv, j, t);
            }
            perm.swap(k, piv);
            x.swap(k, piv);
        }
        let inv = 1.0 / a.at(k, k);
        for i in (k + 1)..n {
            let f = a.at(i, k) * inv;
            if f == 0.0 {
                continue;
            }
            a.set(i, k, f);
            for j in (k + 1)..n {
                let v = a.at(i, j) - f * a.at(k, j);
                a.set(i, j, v);
            }
            x[i] -= f * x[k];
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= a.at(i, j) * x[j];
        }
        x[i] = s / a.at(i, i);
    }
    Ok(x)
}

/// Cholesky factorization in place; returns the lower factor.
pub fn cholesky(mut a: Matrix) -> Result<Matrix> {
    let n = a.n_rows;
    assert_eq!(a.n_cols, n);
    for j in 0..n {
        let mut diag = a.at(j, j);
        for k in 0..j {
            diag -= a.at(j, k) * a.at(j, k);
        }
        if diag <= 0.0 {
            return Err(Error::SolverDiverged {
                residual: diag,
                iterations: j,
            });
        }
        let dj = diag.sqrt();
        a.set(j, j, dj);
        let inv = 1.0 / dj;
        for i in (j + 1)..n {
            let mut s = a.at(i, j);
            let (ri, rj) = (i * n, j * n);
            for k in 0..j {
                s -= a.data[ri + k] * a.data[rj + k];
            }
            a.set(i, j, s * inv);
        }
    }
    // Zero the strict upper triangle for cleanliness.
    for i in 0..n {
        for j in (i + 1)..n {
            a.set(i, j, 0.0);
        }
    }
    Ok(a)
}

/// Solve with a precomputed Cholesky factor.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.n_rows;
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l.at(i, k) * y[k];
        }
        y[i] = s / l.at(i, i);
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.at(k, i) * y[k];
        }
        y[i] = s / l.at(i, i);
    }
    y
}

/// Matrix-free conjugate gradient for SPD operators.
///
/// `apply` must compute y = A x. Iterates until the relative residual drops
/// below `tol` or `max_iter` is hit.
pub fn conjugate_gradient<F>(
    apply: F,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let mut ap = vec![0.0; n];
    for iter in 0..max_iter {
        let rel = rs.sqrt() / bnorm;
        if rel < tol {
            return Ok((x, rel, iter));
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::SolverDiverged {
                residual: rel,
                iterations: iter,
            });
        }
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    let rel = rs.sqrt() / bnorm;
    if rel < tol * 10.0 {
        Ok((x, rel, max_iter))
    } else {
        Err(Error::SolverDiverged {
            residual: rel,
            iterations: max_iter,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    fn random_spd(n: usize, stream: &mut Stream) -> Matrix {
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                g.set(i, j, stream.normal());
            }
        }
        let mut a = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += g.at(k, i) * g.at(k, j);
                }
                a.set(i, j, s + if i == j { n as f64 } else { 0.0 });
            }
        }
        a
    }

    #[test]
    fn lu_solves_known_system() {
        let mut a = Matrix::zeros(2, 2);
        a.set(0, 0, 2.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 1, 3.0);
        let x = solve_lu(a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_and_cg_agree_with_lu() {
        let mut s = Stream::new(1);
        let a = random_spd(40, &mut s);
        let b: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
        let x_lu = solve_lu(a.clone(), &b).unwrap();
        let l = cholesky(a.clone()).unwrap();
        let x_chol = cholesky_solve(&l, &b);
        let (x_cg, _, _) = conjugate_gradient(
            |v, out| {
                let y = a.matvec(v);
                out.copy_from_slice(&y);
            },
            &b,
            None,
            1e-12,
            500,
        )
        .unwrap();
        for i in 0..40 {
            assert!((x_lu[i] - x_chol[i]).abs() < 1e-8);
            assert!((x_lu[i] - x_cg[i]).abs() < 1e-6);
        }
    }
}
