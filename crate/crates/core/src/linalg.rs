//! Small dense symmetric linear algebra: cyclic Jacobi eigensolver and
//! Cholesky factorization.

use crate::error::{DepthError, Result};

/// Maximum number of Jacobi sweeps before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Relative off-diagonal Frobenius norm at which Jacobi stops.
pub const JACOBI_TOL: f64 = 1e-12;

/// Dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(DepthError::LengthMismatch { expected: n * n, got: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(DepthError::LengthMismatch { expected: n, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { n: self.n, data: self.data.iter().map(|v| a * v).collect() }
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.max_abs();
        (0..self.n).all(|i| {
            (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= rel_tol * scale)
        })
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..i {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Eigenpairs of a symmetric matrix, sorted by decreasing eigenvalue.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized first. Iteration stops once the off-diagonal
/// Frobenius norm drops below [`JACOBI_TOL`] times the full Frobenius norm.
pub fn jacobi_eigen(matrix: &SquareMatrix) -> Result<SymmetricEigen> {
    let n = matrix.dim();
    let mut a = matrix.symmetrized();
    // v is stored row-major with eigenvectors as columns during iteration
    let mut v = SquareMatrix::identity(n);
    let total = a.frobenius();
    let mut sweeps = 0;

    if total > 0.0 {
        loop {
            let off = off_diagonal_norm(&a);
            if off <= JACOBI_TOL * total {
                break;
            }
            if sweeps == JACOBI_MAX_SWEEPS {
                return Err(DepthError::NoConvergence { sweeps });
            }
            sweeps += 1;
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let app = a.get(p, p);
                    let aqq = a.get(q, q);
                    // skip rotations that cannot change the diagonal in floating point
                    if sweeps > 3 && apq.abs() * 1e18 < app.abs().min(aqq.abs()) {
                        a.set(p, q, 0.0);
                        a.set(q, p, 0.0);
                        continue;
                    }
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    rotate(&mut a, &mut v, p, q, c, s, t);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(j, j).total_cmp(&a.get(i, i)).then(i.cmp(&j)));
    let values = order.iter().map(|&k| a.get(k, k)).collect();
    let vectors = order.iter().map(|&k| (0..n).map(|i| v.get(i, k)).collect()).collect();
    Ok(SymmetricEigen { values, vectors, sweeps })
}

fn off_diagonal_norm(a: &SquareMatrix) -> f64 {
    let n = a.dim();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a.get(i, j) * a.get(i, j);
            }
        }
    }
    s.sqrt()
}

/// Applies the Jacobi rotation annihilating `a[p][q]`.
fn rotate(a: &mut SquareMatrix, v: &mut SquareMatrix, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = a.dim();
    let apq = a.get(p, q);
    let tau = s / (1.0 + c);
    a.set(p, p, a.get(p, p) - t * apq);
    a.set(q, q, a.get(q, q) + t * apq);
    a.set(p, q, 0.0);
    a.set(q, p, 0.0);
    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a.get(r, p);
        let arq = a.get(r, q);
        let new_rp = arp - s * (arq + tau * arp);
        let new_rq = arq + s * (arp - tau * arq);
        a.set(r, p, new_rp);
        a.set(p, r, new_rp);
        a.set(r, q, new_rq);
        a.set(q, r, new_rq);
    }
    for r in 0..n {
        let vrp = v.get(r, p);
        let vrq = v.get(r, q);
        v.set(r, p, vrp - s * (vrq + tau * vrp));
        v.set(r, q, vrq + s * (vrp - tau * vrq));
    }
}

/// Lower-triangular Cholesky factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: SquareMatrix,
}

impl Cholesky {
    pub fn factor(a: &SquareMatrix) -> Result<Self> {
        let n = a.dim();
        let mut l = SquareMatrix::zeros(n);
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > 0.0) {
                return Err(DepthError::NotPositiveDefinite);
            }
            let djj = d.sqrt();
            l.set(j, j, djj);
            for i in j + 1..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / djj);
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &SquareMatrix {
        &self.lower
    }

    /// Solves `L y = b` by forward substitution.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lower.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower.get(i, k) * y[k];
            }
            y[i] = s / self.lower.get(i, i);
        }
        y
    }

    /// `L z`, used to colour standard normal draws.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        let n = self.lower.dim();
        (0..n).map(|i| (0..=i).map(|k| self.lower.get(i, k) * z[k]).sum()).collect()
    }
}
