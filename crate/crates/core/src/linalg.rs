//! Dense row-major matrices and the few kernels the aligners need.
//!
//! All reductions run in a fixed order so results are bitwise reproducible.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: data.len(),
                context: "matrix data",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                actual: other.rows,
                context: "matmul inner dimension",
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm_nn(&self.data, &other.data, &mut out.data, self.rows, self.cols, other.cols);
        Ok(out)
    }

    /// `selfᵀ · other`
    pub fn t_matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                actual: other.rows,
                context: "transposed matmul inner dimension",
            });
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        gemm_tn(&self.data, &other.data, &mut out.data, self.rows, self.cols, other.cols);
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
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

/// Dot product with four independent accumulators, combined in a fixed order.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm(v: &[f64]) -> f64 {
    libm::sqrt(dot(v, v))
}

/// `c_row += Σ coeffs[r] · rows[r]`, four rows per pass over `c_row`.
#[inline]
fn accumulate_rows(coeffs: &[f64], rows: &[f64], n: usize, c_row: &mut [f64]) {
    let k = coeffs.len();
    let mut p = 0;
    while p + 4 <= k {
        let (a0, a1, a2, a3) = (coeffs[p], coeffs[p + 1], coeffs[p + 2], coeffs[p + 3]);
        let r0 = &rows[p * n..(p + 1) * n];
        let r1 = &rows[(p + 1) * n..(p + 2) * n];
        let r2 = &rows[(p + 2) * n..(p + 3) * n];
        let r3 = &rows[(p + 3) * n..(p + 4) * n];
        for j in 0..n {
            c_row[j] += (a0 * r0[j] + a1 * r1[j]) + (a2 * r2[j] + a3 * r3[j]);
        }
        p += 4;
    }
    while p < k {
        axpy(coeffs[p], &rows[p * n..(p + 1) * n], c_row);
        p += 1;
    }
}

/// `c += a · b` with `a: m×k`, `b: k×n`, `c: m×n`.
pub fn gemm_nn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    for i in 0..m {
        accumulate_rows(&a[i * k..(i + 1) * k], &b[..k * n], n, &mut c[i * n..(i + 1) * n]);
    }
}

/// `c += aᵀ · b` with `a: m×k`, `b: m×n`, `c: k×n`.
pub fn gemm_tn(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    assert!(a.len() >= m * k && b.len() >= m * n && c.len() >= k * n);
    // c[p, :] += Σ_i a[i, p] b[i, :], accumulated four samples at a time
    let mut col = alloc::vec![0.0; m];
    for p in 0..k {
        for i in 0..m {
            col[i] = a[i * k + p];
        }
        accumulate_rows(&col, &b[..m * n], n, &mut c[p * n..(p + 1) * n]);
    }
}

/// `c += a · bᵀ` with `a: m×k`, `b: n×k`, `c: m×n`.
pub fn gemm_nt(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        for j in 0..n {
            c[i * n + j] += dot(a_row, &b[j * k..(j + 1) * k]);
        }
    }
}

/// Relative pivot threshold below which a Cholesky factorization is
/// declared rank deficient.
const CHOLESKY_PIVOT_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: a.cols,
            context: "cholesky needs a square matrix",
        });
    }
    let scale = (0..n).fold(0.0, |m, i| f64::max(m, a[(i, i)].abs()));
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] - dot(&l.row(j)[..j], &l.row(j)[..j]);
        if !(d > CHOLESKY_PIVOT_TOL * scale) {
            return Err(Error::RankDeficient);
        }
        d = libm::sqrt(d);
        l[(j, j)] = d;
        for i in j + 1..n {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `a · x = b` for SPD `a` (n×n) and `b` (n×m).
pub fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let l = cholesky(a)?;
    let n = a.rows;
    if b.rows != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: b.rows,
            context: "cholesky right-hand side",
        });
    }
    let m = b.cols;
    let mut x = b.clone();
    for col in 0..m {
        // forward: L y = b
        for i in 0..n {
            let mut s = x[(i, col)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
        // backward: Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = x[(i, col)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, col)];
            }
            x[(i, col)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Thin singular value decomposition `a = u · diag(s) · vᵀ` of a square or
/// tall matrix.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

pub const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns of `a` are rotated pairwise until every pair is orthogonal to
/// within [`JACOBI_TOL`] relative to their norms. Columns of `u` whose
/// singular value vanishes are completed to an orthonormal basis.
pub fn svd_jacobi(a: &Matrix) -> Result<Svd> {
    let (m, n) = (a.rows, a.cols);
    if m < n {
        return Err(Error::InvalidInput("svd_jacobi needs rows >= cols".into()));
    }
    // work on columns as contiguous vectors
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::InvalidInput("jacobi svd did not converge".into()));
    }

    let singular_values: Vec<f64> = cols.iter().map(|c| norm(c)).collect();
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    let mut u_cols: Vec<Option<Vec<f64>>> = cols
        .iter()
        .zip(&singular_values)
        .map(|(c, &s)| {
            if s > smax * 1e-14 && s > 0.0 {
                Some(c.iter().map(|x| x / s).collect())
            } else {
                None
            }
        })
        .collect();
    complete_basis(&mut u_cols, m);

    let u = Matrix::from_fn(m, n, |i, j| u_cols[j].as_ref().unwrap()[i]);
    let v = Matrix::from_fn(n, n, |i, j| v[j][i]);
    Ok(Svd {
        u,
        singular_values,
        v,
    })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let (cp, cq) = (&mut lo[p], &mut hi[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills `None` columns with unit vectors orthogonal to all others
/// (Gram-Schmidt against the standard basis).
fn complete_basis(cols: &mut [Option<Vec<f64>>], m: usize) {
    for j in 0..cols.len() {
        if cols[j].is_some() {
            continue;
        }
        for e in 0..m {
            let mut cand = vec![0.0; m];
            cand[e] = 1.0;
            // two passes of projection removal for stability
            for _ in 0..2 {
                for other in cols.iter().flatten() {
                    let d = dot(&cand, other);
                    axpy(-d, other, &mut cand);
                }
            }
            let nrm = norm(&cand);
            if nrm > 1e-6 {
                cand.iter_mut().for_each(|x| *x /= nrm);
                cols[j] = Some(cand);
                break;
            }
        }
    }
}

/// Householder QR of a square matrix; returns `q` with the sign convention
/// `diag(r) >= 0`.
pub fn qr_orthogonal(a: &Matrix) -> Result<Matrix> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::InvalidInput("qr_orthogonal needs a square matrix".into()));
    }
    let mut r = a.clone();
    let mut q = Matrix::identity(n);
    for k in 0..n {
        let x: Vec<f64> = (k..n).map(|i| r[(i, k)]).collect();
        let alpha = norm(&x);
        if alpha == 0.0 {
            continue;
        }
        let sign = if x[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = x;
        v[0] += sign * alpha;
        let vnorm = norm(&v);
        v.iter_mut().for_each(|e| *e /= vnorm);
        // r = (I - 2vvᵀ) r on rows k..n
        for j in 0..n {
            let s: f64 = (k..n).map(|i| v[i - k] * r[(i, j)]).sum();
            for i in k..n {
                r[(i, j)] -= 2.0 * v[i - k] * s;
            }
        }
        // q = q (I - 2vvᵀ) on cols k..n
        for i in 0..n {
            let s: f64 = (k..n).map(|j| q[(i, j)] * v[j - k]).sum();
            for j in k..n {
                q[(i, j)] -= 2.0 * s * v[j - k];
            }
        }
    }
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            for i in 0..n {
                q[(i, k)] = -q[(i, k)];
            }
        }
    }
    Ok(q)
}

/// `max |aᵀa - I|`
pub fn orthogonality_defect(a: &Matrix) -> f64 {
    let ata = a.t_matmul(a).expect("square");
    ata.max_abs_diff(&Matrix::identity(a.cols))
}
