//! Classical alignment baselines.
//!
//! Maps use the row-vector convention `z = x · W`, so `W` is `d_src × d_tgt`
//! and the source and target spaces may differ in dimension.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::table::EmbeddingTable;
use crate::targets::PairedDataset;

/// Ridge used when an unregularized least-squares fit is rank deficient.
pub const FALLBACK_RIDGE: f64 = 1e-6;
pub const DEFAULT_NORMALIZE_TOL: f64 = 1e-6;
pub const DEFAULT_NORMALIZE_MAX_ITER: usize = 100;

/// Unconstrained linear map fitted by least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    w: Matrix,
}

impl LinearMap {
    pub fn new(w: Matrix) -> Result<Self> {
        if w.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear map".into()));
        }
        Ok(Self { w })
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn d_src(&self) -> usize {
        self.w.rows()
    }

    pub fn d_tgt(&self) -> usize {
        self.w.cols()
    }

    pub fn parameter_count(&self) -> usize {
        self.d_src() * self.d_tgt()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        apply_matrix(&self.w, x)
    }
}

/// Orthogonal map (`Wᵀ W = I`) from the Procrustes solution.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMap {
    w: Matrix,
}

impl OrthogonalMap {
    pub const ORTHOGONALITY_TOL: f64 = 1e-8;

    pub fn new(w: Matrix) -> Result<Self> {
        if w.rows() != w.cols() {
            return Err(Error::DimensionMismatch {
                expected: w.rows(),
                actual: w.cols(),
                context: "orthogonal map must be square",
            });
        }
        if w.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("orthogonal map".into()));
        }
        let defect = linalg::orthogonality_defect(&w);
        if defect > Self::ORTHOGONALITY_TOL {
            return Err(Error::InvalidInput(alloc::format!(
                "matrix is not orthogonal (max |WᵀW - I| = {defect:e})"
            )));
        }
        Ok(Self { w })
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        apply_matrix(&self.w, x)
    }
}

fn apply_matrix(w: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != w.rows() {
        return Err(Error::DimensionMismatch {
            expected: w.rows(),
            actual: x.len(),
            context: "map input",
        });
    }
    let mut out = vec![0.0; w.cols()];
    linalg::gemm_nn(x, w.as_slice(), &mut out, 1, w.rows(), w.cols());
    Ok(out)
}

fn design_matrices(pairs: &PairedDataset) -> Result<(Matrix, Matrix)> {
    let x = Matrix::from_vec(pairs.len(), pairs.src_dim(), pairs.sources_flat().to_vec())?;
    let z = Matrix::from_vec(pairs.len(), pairs.tgt_dim(), pairs.targets_flat().to_vec())?;
    Ok((x, z))
}

/// Minimizes `Σ‖xᵢW − zᵢ‖² + ridge·‖W‖²_F` through the normal equations.
pub fn fit_linear(pairs: &PairedDataset, ridge: f64) -> Result<LinearMap> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("fit_linear needs at least one pair".into()));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::InvalidInput("ridge must be a non-negative real".into()));
    }
    let (x, z) = design_matrices(pairs)?;
    let mut gram = x.t_matmul(&x)?;
    for i in 0..gram.rows() {
        gram[(i, i)] += ridge;
    }
    let rhs = x.t_matmul(&z)?;
    LinearMap::new(linalg::cholesky_solve(&gram, &rhs)?)
}

/// Ridge-regularized objective value of `w` on `pairs`.
pub fn linear_objective(w: &Matrix, pairs: &PairedDataset, ridge: f64) -> f64 {
    residual_sum_sq(w, pairs) + ridge * w.frobenius_sq()
}

/// `Σᵢ ‖xᵢW − zᵢ‖²`
pub fn residual_sum_sq(w: &Matrix, pairs: &PairedDataset) -> f64 {
    let mut total = 0.0;
    let mut pred = vec![0.0; w.cols()];
    for i in 0..pairs.len() {
        pred.iter_mut().for_each(|p| *p = 0.0);
        linalg::gemm_nn(pairs.source(i), w.as_slice(), &mut pred, 1, w.rows(), w.cols());
        total += pred
            .iter()
            .zip(pairs.target(i))
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
    }
    total
}

/// Orthogonal Procrustes: `W = U Vᵀ` where `Xᵀ Z = U Σ Vᵀ`.
pub fn fit_orthogonal(pairs: &PairedDataset) -> Result<OrthogonalMap> {
    if pairs.src_dim() != pairs.tgt_dim() {
        return Err(Error::DimensionMismatch {
            expected: pairs.src_dim(),
            actual: pairs.tgt_dim(),
            context: "orthogonal alignment needs equal source and target dimensions",
        });
    }
    if pairs.is_empty() {
        return Err(Error::InvalidInput("fit_orthogonal needs at least one pair".into()));
    }
    let (x, z) = design_matrices(pairs)?;
    let m = x.t_matmul(&z)?;
    let svd = linalg::svd_jacobi(&m)?;
    OrthogonalMap::new(svd.u.matmul(&svd.v.transpose())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizeStatus {
    pub iterations: usize,
    /// False when `max_iter` was reached first; the table is still returned.
    pub converged: bool,
}

/// Alternates unit-length normalization and mean-centering until every
/// norm is within `tol` of 1 and the mean's norm is at most `tol`.
pub fn iterative_normalize(
    table: &EmbeddingTable,
    tol: f64,
    max_iter: usize,
) -> Result<(EmbeddingTable, NormalizeStatus)> {
    if table.len() < 2 {
        return Err(Error::InvalidInput("iterative normalization needs at least two vectors".into()));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidInput("tol and max_iter must be positive".into()));
    }
    let dim = table.dim();
    let n = table.len();
    let mut data = table.as_flat().to_vec();
    let mut mean = vec![0.0; dim];

    for iteration in 1..=max_iter {
        for (i, row) in data.chunks_exact_mut(dim).enumerate() {
            let nrm = linalg::norm(row);
            if nrm < ZERO_NORM {
                return Err(Error::ZeroVector {
                    key: table.names()[i].clone(),
                    iteration,
                });
            }
            row.iter_mut().for_each(|v| *v /= nrm);
        }
        column_mean(&data, dim, &mut mean);
        for row in data.chunks_exact_mut(dim) {
            row.iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
        }

        column_mean(&data, dim, &mut mean);
        let mean_ok = linalg::norm(&mean) <= tol;
        let norms_ok = data
            .chunks_exact(dim)
            .all(|row| (linalg::norm(row) - 1.0).abs() <= tol);
        if mean_ok && norms_ok {
            return Ok((
                table.map_rows_flat(dim, data),
                NormalizeStatus {
                    iterations: iteration,
                    converged: true,
                },
            ));
        }
    }
    debug_assert_eq!(data.len(), n * dim);
    Ok((
        table.map_rows_flat(dim, data),
        NormalizeStatus {
            iterations: max_iter,
            converged: false,
        },
    ))
}

/// Norms below this are treated as zero vectors.
const ZERO_NORM: f64 = 1e-12;

fn column_mean(data: &[f64], dim: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|m| *m = 0.0);
    let mut n = 0usize;
    for row in data.chunks_exact(dim) {
        out.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        n += 1;
    }
    out.iter_mut().for_each(|m| *m /= n as f64);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(rows: &[(&[f64], &[f64])]) -> PairedDataset {
        let mut p = PairedDataset::new(rows[0].0.len(), rows[0].1.len()).unwrap();
        for (i, (x, z)) in rows.iter().enumerate() {
            p.push(alloc::format!("k{i}"), x, z).unwrap();
        }
        p
    }

    #[test]
    fn single_pair_exactly_determined() {
        let m = fit_linear(&pairs(&[(&[1.0], &[2.0, 0.0])]), 0.0).unwrap();
        assert_eq!(m.weights().as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn zero_targets_give_zero_map() {
        let p = pairs(&[(&[1.0, 0.0], &[0.0]), (&[0.0, 1.0], &[0.0]), (&[1.0, 1.0], &[0.0])]);
        let m = fit_linear(&p, 0.0).unwrap();
        assert!(m.weights().as_slice().iter().all(|&w| w == 0.0));
    }

    #[test]
    fn rank_deficient_without_ridge() {
        let p = pairs(&[(&[1.0, 1.0], &[1.0]), (&[2.0, 2.0], &[2.0])]);
        assert_eq!(fit_linear(&p, 0.0), Err(Error::RankDeficient));
        assert!(fit_linear(&p, FALLBACK_RIDGE).is_ok());
        assert!(fit_linear(&p, -1.0).is_err());
    }

    #[test]
    fn apply_conventions() {
        let id = LinearMap::new(Matrix::identity(2)).unwrap();
        assert_eq!(id.apply(&[3.0, 4.0]).unwrap(), [3.0, 4.0]);
        let two = LinearMap::new(Matrix::from_vec(2, 2, alloc::vec![2.0, 0.0, 0.0, 2.0]).unwrap()).unwrap();
        assert_eq!(two.apply(&[1.0, 1.0]).unwrap(), [2.0, 2.0]);
        assert!(matches!(two.apply(&[1.0]), Err(Error::DimensionMismatch { .. })));
        // row-vector convention: x · W picks rows of W
        let rect = LinearMap::new(Matrix::from_vec(1, 3, alloc::vec![1.0, 2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(rect.apply(&[2.0]).unwrap(), [2.0, 4.0, 6.0]);
    }

    #[test]
    fn orthogonal_identity_pairs() {
        let p = pairs(&[(&[1.0, 0.0], &[1.0, 0.0]), (&[0.0, 1.0], &[0.0, 1.0]), (&[1.0, 2.0], &[1.0, 2.0])]);
        let m = fit_orthogonal(&p).unwrap();
        assert!(m.weights().max_abs_diff(&Matrix::identity(2)) < 1e-12);
    }

    #[test]
    fn orthogonal_rejects_unequal_dims() {
        let p = pairs(&[(&[1.0], &[1.0, 0.0])]);
        assert!(matches!(fit_orthogonal(&p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn normalize_fixed_point() {
        let t = EmbeddingTable::from_rows(2, [("a", [1.0, 0.0]), ("b", [-1.0, 0.0])]).unwrap();
        let (out, status) = iterative_normalize(&t, 1e-6, 100).unwrap();
        assert_eq!(out, t);
        assert_eq!(status, NormalizeStatus { iterations: 1, converged: true });
    }

    #[test]
    fn normalize_two_axes() {
        let t = EmbeddingTable::from_rows(2, [("a", [2.0, 0.0]), ("b", [0.0, 2.0])]).unwrap();
        let (out, status) = iterative_normalize(&t, 1e-6, 100).unwrap();
        assert!(status.converged);
        for (_, v) in out.iter() {
            assert!((linalg::norm(v) - 1.0).abs() <= 1e-6);
        }
        let mean: Vec<f64> = (0..2).map(|j| (out.row(0)[j] + out.row(1)[j]) / 2.0).collect();
        assert!(linalg::norm(&mean) <= 1e-6);
        // input is untouched
        assert_eq!(t.get("a"), Some(&[2.0, 0.0][..]));
    }

    #[test]
    fn normalize_colinear_collapses() {
        let t = EmbeddingTable::from_rows(2, [("a", [1.0, 0.0]), ("b", [2.0, 0.0])]).unwrap();
        assert!(matches!(
            iterative_normalize(&t, 1e-6, 100),
            Err(Error::ZeroVector { iteration: 2, .. })
        ));
    }

    #[test]
    fn normalize_preconditions() {
        let one = EmbeddingTable::from_rows(2, [("a", [1.0, 0.0])]).unwrap();
        assert!(iterative_normalize(&one, 1e-6, 100).is_err());
        let zero = EmbeddingTable::from_rows(2, [("a", [0.0, 0.0]), ("b", [1.0, 0.0])]).unwrap();
        assert!(matches!(iterative_normalize(&zero, 1e-6, 100), Err(Error::ZeroVector { iteration: 1, .. })));
    }
}
