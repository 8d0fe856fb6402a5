//! Small dense linear algebra used by the problem generators and the
//! reference solvers. Row-major storage, no BLAS.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{abs, sqrt};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Matrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| crate::math::dot(self.row(i), x)).collect()
    }

    /// `self^T * x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len());
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    /// `self^T * self`.
    pub fn gram(&self) -> Matrix {
        let mut g = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..self.cols {
                let ra = r[a];
                if ra == 0.0 {
                    continue;
                }
                let g_row = &mut g.data[a * self.cols..(a + 1) * self.cols];
                for b in a..self.cols {
                    g_row[b] += ra * r[b];
                }
            }
        }
        for a in 0..self.cols {
            for b in 0..a {
                g.data[a * self.cols + b] = g.data[b * self.cols + a];
            }
        }
        g
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Householder QR of an `m x n` matrix with `m >= n`.
///
/// Reflectors are kept in compact form; `R` is the upper `n x n` block.
#[derive(Debug, Clone)]
pub struct Qr {
    /// Column-major copy of the factored matrix: entries from the diagonal
    /// down hold the reflector vectors, entries above it hold `R`.
    cols: Vec<Vec<f64>>,
    betas: Vec<f64>,
    diag: Vec<f64>,
    m: usize,
}

impl Qr {
    pub fn new(a: &Matrix) -> Self {
        let (m, n) = (a.rows(), a.cols());
        assert!(m >= n, "Householder QR requires rows >= cols");
        let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
        let mut betas = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for k in 0..n {
            let norm = sqrt(cols[k][k..].iter().map(|v| v * v).sum());
            if norm == 0.0 {
                continue;
            }
            let alpha = if cols[k][k] > 0.0 { -norm } else { norm };
            // v = x - alpha e1, stored in place; R_kk = alpha.
            cols[k][k] -= alpha;
            let vnorm_sq: f64 = cols[k][k..].iter().map(|v| v * v).sum();
            let beta = if vnorm_sq == 0.0 { 0.0 } else { 2.0 / vnorm_sq };
            betas[k] = beta;
            let (head, tail) = cols.split_at_mut(k + 1);
            let v = &head[k][k..];
            for col in tail.iter_mut() {
                let s: f64 = v.iter().zip(&col[k..]).map(|(a, b)| a * b).sum();
                let s = s * beta;
                for (c, vi) in col[k..].iter_mut().zip(v) {
                    *c -= s * vi;
                }
            }
            diag[k] = alpha;
        }
        Qr { cols, betas, diag, m }
    }

    fn n(&self) -> usize {
        self.betas.len()
    }

    /// Diagonal entry `R_kk`.
    pub fn r_diag(&self, k: usize) -> f64 {
        self.diag[k]
    }

    fn r(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            core::cmp::Ordering::Equal => self.r_diag(i),
            core::cmp::Ordering::Less => self.cols[j][i],
            core::cmp::Ordering::Greater => 0.0,
        }
    }

    /// Applies `Q^T` to `b` in place.
    pub fn apply_qt(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.m);
        for k in 0..self.n() {
            if self.betas[k] == 0.0 {
                continue;
            }
            let v = &self.cols[k][k..self.m];
            let s: f64 = v.iter().zip(&b[k..]).map(|(a, c)| a * c).sum::<f64>() * self.betas[k];
            for (bi, vi) in b[k..].iter_mut().zip(v) {
                *bi -= s * vi;
            }
        }
    }

    /// Applies `Q` to `b` in place.
    pub fn apply_q(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.m);
        for k in (0..self.n()).rev() {
            if self.betas[k] == 0.0 {
                continue;
            }
            let v = &self.cols[k][k..self.m];
            let s: f64 = v.iter().zip(&b[k..]).map(|(a, c)| a * c).sum::<f64>() * self.betas[k];
            for (bi, vi) in b[k..].iter_mut().zip(v) {
                *bi -= s * vi;
            }
        }
    }

    /// Thin `Q` factor (`m x n`) with orthonormal columns.
    pub fn thin_q(&self) -> Matrix {
        let n = self.n();
        let mut q = Matrix::zeros(self.m, n);
        let mut e = vec![0.0; self.m];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.apply_q(&mut e);
            for i in 0..self.m {
                q[(i, j)] = e[i];
            }
        }
        q
    }

    fn rank_ok(&self) -> bool {
        let n = self.n();
        let scale = (0..n).map(|k| abs(self.r_diag(k))).fold(0.0, f64::max);
        scale > 0.0 && (0..n).all(|k| abs(self.r_diag(k)) > 1e-13 * scale)
    }

    /// Solves `R x = y` for the leading `n` entries of `y`.
    fn solve_r(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.r(i, j) * xj;
            }
            x[i] = s / self.r_diag(i);
        }
        x
    }

    /// Solves `R^T y = x`.
    fn solve_rt(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = rhs[i];
            for (j, yj) in y.iter().enumerate().take(i) {
                s -= self.r(j, i) * yj;
            }
            y[i] = s / self.r_diag(i);
        }
        y
    }
}

/// Minimum-norm least-squares solution of `A x ≈ b` for `A` of full row or
/// column rank, with one step of iterative refinement.
pub fn least_squares(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.rows(), b.len());
    if a.rows() >= a.cols() {
        let qr = Qr::new(a);
        if !qr.rank_ok() {
            return Err(Error::Singular);
        }
        let solve = |rhs: &[f64]| {
            let mut y = rhs.to_vec();
            qr.apply_qt(&mut y);
            qr.solve_r(&y)
        };
        let mut x = solve(b);
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        Ok(x)
    } else {
        // Underdetermined: A^T = Q R, x = Q R^{-T} b.
        let at = a.transpose();
        let qr = Qr::new(&at);
        if !qr.rank_ok() {
            return Err(Error::Singular);
        }
        let solve = |rhs: &[f64]| {
            let y = qr.solve_rt(rhs);
            let mut full = vec![0.0; at.rows()];
            full[..y.len()].copy_from_slice(&y);
            qr.apply_q(&mut full);
            full
        };
        let mut x = solve(b);
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let dx = solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        Ok(x)
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(s: &Matrix) -> Vec<f64> {
    let n = s.rows();
    assert_eq!(n, s.cols());
    let mut a = s.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let diag: f64 = (0..n).map(|i| a[(i, i)] * a[(i, i)]).sum();
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (abs(theta) + sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / sqrt(t * t + 1.0);
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// Solves `S x = b` for symmetric positive definite `S` via Cholesky.
pub fn cholesky_solve(s: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = s[(i, j)];
            for k in 0..j {
                sum -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(sum > 0.0) {
                    return Err(Error::Singular);
                }
                l[(i, i)] = sqrt(sum);
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l[(i, k)] * y[k];
        }
        y[i] = sum / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum -= l[(k, i)] * x[k];
        }
        x[i] = sum / l[(i, i)];
    }
    Ok(x)
}
