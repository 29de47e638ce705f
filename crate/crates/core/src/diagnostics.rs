//! Self-checks runnable outside the test harness: finite-difference gradient
//! checks and exact-recovery checks for the linear aligners.

use alloc::vec::Vec;

use crate::align::{fit_linear, fit_orthogonal};
use crate::error::Result;
use crate::linalg::{self, Matrix};
use crate::mlp::{DropoutMask, MlpHomogenizer, Mode};
use crate::rng::{self, normal};
use crate::targets::PairedDataset;

pub const FD_STEP: f64 = 1e-4;
pub const GRADIENT_TOL: f64 = 1e-5;
pub const RECOVERY_TOL: f64 = 1e-8;

/// `|a - b| / max(|a|, |b|, 1e-8)`
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReport {
    pub dims: (usize, usize, usize),
    /// Worst relative error per group: W1, b1, ln_gain, ln_bias, W2, b2, input.
    pub max_rel_error: [f64; 7],
}

impl GradientReport {
    pub fn worst(&self) -> f64 {
        self.max_rel_error.iter().cloned().fold(0.0, f64::max)
    }
}

/// Compares analytic gradients of `L = Σ c·y` (random `c`) with central
/// differences on a random network with a random dropout mask.
pub fn gradient_check(d_src: usize, d_hidden: usize, d_tgt: usize, seed: u64) -> Result<GradientReport> {
    let mut r = rng::stream(seed, 0x6772_6164);
    let mut model = MlpHomogenizer::init(d_src, d_hidden, d_tgt, 1e-5, &mut r)?;
    for g in [&mut model.b1, &mut model.ln_bias, &mut model.b2] {
        g.iter_mut().for_each(|v| *v = 0.5 * normal(&mut r));
    }
    model.ln_gain.iter_mut().for_each(|v| *v = 1.0 + 0.5 * normal(&mut r));
    let x: Vec<f64> = (0..d_src).map(|_| normal(&mut r)).collect();
    let c: Vec<f64> = (0..d_tgt).map(|_| normal(&mut r)).collect();
    let mask = DropoutMask::draw(&mut r, d_src, 0.25)?;

    let (_, cache) = model.forward(&x, Mode::Train(&mask))?;
    let grads = model.backward(&cache, &c)?;

    let objective = |m: &MlpHomogenizer, x: &[f64]| -> Result<f64> {
        let (y, _) = m.forward(x, Mode::Train(&mask))?;
        Ok(linalg::dot(&y, &c))
    };

    let mut report = GradientReport {
        dims: (d_src, d_hidden, d_tgt),
        max_rel_error: [0.0; 7],
    };
    for group in 0..6 {
        let len = model.groups()[group].len();
        for k in 0..len {
            let orig = model.groups()[group][k];
            model.groups_mut()[group][k] = orig + FD_STEP;
            let plus = objective(&model, &x)?;
            model.groups_mut()[group][k] = orig - FD_STEP;
            let minus = objective(&model, &x)?;
            model.groups_mut()[group][k] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let err = relative_error(grads.groups()[group][k], numeric);
            report.max_rel_error[group] = report.max_rel_error[group].max(err);
        }
    }
    let mut xp = x.clone();
    for k in 0..d_src {
        xp[k] = x[k] + FD_STEP;
        let plus = objective(&model, &xp)?;
        xp[k] = x[k] - FD_STEP;
        let minus = objective(&model, &xp)?;
        xp[k] = x[k];
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        report.max_rel_error[6] = report.max_rel_error[6].max(relative_error(grads.input[k], numeric));
    }
    Ok(report)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut rng::ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// Random rotation from the QR factorization of a Gaussian matrix.
pub fn random_rotation(n: usize, rng: &mut rng::ChaCha8Rng) -> Result<Matrix> {
    linalg::qr_orthogonal(&random_matrix(n, n, rng))
}

fn pairs_from(x: &Matrix, w: &Matrix) -> Result<PairedDataset> {
    let z = x.matmul(w)?;
    let mut p = PairedDataset::new(x.cols(), w.cols())?;
    for i in 0..x.rows() {
        p.push(alloc::format!("p{i}"), x.row(i), z.row(i))?;
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryReport {
    /// `max |W - W*|`
    pub weight_error: f64,
    /// `max |x W - z|` over training pairs (linear) or `max |WᵀW - I|` (orthogonal)
    pub secondary_error: f64,
}

/// Fits noiseless pairs `z = x W*` for a random `W*` and reports recovery.
pub fn linear_recovery(d_src: usize, d_tgt: usize, n: usize, seed: u64) -> Result<RecoveryReport> {
    let mut r = rng::stream(seed, 0x6c69_6e);
    let w_star = random_matrix(d_src, d_tgt, &mut r);
    let x = random_matrix(n, d_src, &mut r);
    let pairs = pairs_from(&x, &w_star)?;
    let fitted = fit_linear(&pairs, 0.0)?;
    let mut apply_err: f64 = 0.0;
    for i in 0..pairs.len() {
        let y = fitted.apply(pairs.source(i))?;
        for (a, b) in y.iter().zip(pairs.target(i)) {
            apply_err = apply_err.max((a - b).abs());
        }
    }
    Ok(RecoveryReport {
        weight_error: fitted.weights().max_abs_diff(&w_star),
        secondary_error: apply_err,
    })
}

/// Fits `z = x R` for a random rotation `R` and reports recovery.
pub fn orthogonal_recovery(dim: usize, n: usize, seed: u64) -> Result<RecoveryReport> {
    let mut r = rng::stream(seed, 0x6f72_7468);
    let rot = random_rotation(dim, &mut r)?;
    let x = random_matrix(n, dim, &mut r);
    let pairs = pairs_from(&x, &rot)?;
    let fitted = fit_orthogonal(&pairs)?;
    Ok(RecoveryReport {
        weight_error: fitted.weights().max_abs_diff(&rot),
        secondary_error: linalg::orthogonality_defect(fitted.weights()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_gradient_check_passes() {
        let rep = gradient_check(3, 4, 2, 1).unwrap();
        assert!(rep.worst() <= GRADIENT_TOL, "{rep:?}");
    }

    #[test]
    fn recovery_checks_pass() {
        let lin = linear_recovery(4, 6, 50, 2).unwrap();
        assert!(lin.weight_error <= RECOVERY_TOL && lin.secondary_error <= RECOVERY_TOL);
        let orth = orthogonal_recovery(5, 50, 3).unwrap();
        assert!(orth.weight_error <= RECOVERY_TOL && orth.secondary_error <= RECOVERY_TOL);
    }
}
