use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{self, ChaCha8Rng};

pub const DEFAULT_HIDDEN: usize = 300;
pub const DEFAULT_LN_EPS: f64 = 1e-5;

/// One-hidden-layer homogenizer:
///
/// ```text
/// x → dropout (train only) → h = x·W1 + b1 → layernorm(h) → tanh → y = a·W2 + b2
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct MlpHomogenizer {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub ln_eps: f64,
}

/// Which input coordinates survive dropout, for a single sample or a whole
/// batch (sample-major). Kept units are scaled by `1 / (1 - p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    keep: Vec<bool>,
    p: f64,
}

impl DropoutMask {
    pub fn new(keep: Vec<bool>, p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::InvalidInput("dropout probability must be in [0, 1)".into()));
        }
        Ok(Self { keep, p })
    }

    /// Each unit is dropped independently with probability `p`.
    pub fn draw(rng: &mut ChaCha8Rng, len: usize, p: f64) -> Result<Self> {
        let keep = (0..len).map(|_| rng.gen::<f64>() >= p).collect();
        Self::new(keep, p)
    }

    pub fn all_kept(len: usize) -> Self {
        Self {
            keep: vec![true; len],
            p: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.keep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep.is_empty()
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn scales(&self) -> impl Iterator<Item = f64> + '_ {
        let s = 1.0 / (1.0 - self.p);
        self.keep.iter().map(move |&k| if k { s } else { 0.0 })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Eval,
    Train(&'a DropoutMask),
}

/// Intermediate activations of a batched forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    batch: usize,
    /// per-input multiplier applied by dropout (all ones in eval mode)
    input_scale: Vec<f64>,
    dropped: Vec<f64>,
    xhat: Vec<f64>,
    rstd: Vec<f64>,
    activations: Vec<f64>,
    shape: (usize, usize, usize),
}

impl Cache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Input after dropout and rescaling, sample-major.
    pub fn dropped_input(&self) -> &[f64] {
        &self.dropped
    }

    /// Post-tanh hidden activations, sample-major.
    pub fn activations(&self) -> &[f64] {
        &self.activations
    }
}

/// Gradients in the same layout as the parameters, plus the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub ln_gain: Vec<f64>,
    pub ln_bias: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    pub input: Vec<f64>,
}

impl Gradients {
    /// Parameter gradients in the fixed group order
    /// `W1, b1, ln_gain, ln_bias, W2, b2`.
    pub fn groups(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice(),
            &self.b1,
            &self.ln_gain,
            &self.ln_bias,
            self.w2.as_slice(),
            &self.b2,
        ]
    }

    pub(crate) fn groups_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            &mut self.ln_gain,
            &mut self.ln_bias,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }
}

pub const PARAM_GROUP_NAMES: [&str; 6] = ["W1", "b1", "ln_gain", "ln_bias", "W2", "b2"];

impl MlpHomogenizer {
    /// All-zero weights and biases with identity layer norm.
    pub fn zeros(d_src: usize, d_hidden: usize, d_tgt: usize, ln_eps: f64) -> Result<Self> {
        if d_src == 0 || d_hidden == 0 || d_tgt == 0 {
            return Err(Error::InvalidInput("network dimensions must be positive".into()));
        }
        if !(ln_eps > 0.0) {
            return Err(Error::InvalidInput("ln_eps must be positive".into()));
        }
        Ok(Self {
            w1: Matrix::zeros(d_src, d_hidden),
            b1: vec![0.0; d_hidden],
            ln_gain: vec![1.0; d_hidden],
            ln_bias: vec![0.0; d_hidden],
            w2: Matrix::zeros(d_hidden, d_tgt),
            b2: vec![0.0; d_tgt],
            ln_eps,
        })
    }

    /// Glorot-uniform weights (W1 then W2, row-major), zero biases, identity
    /// layer norm.
    pub fn init(d_src: usize, d_hidden: usize, d_tgt: usize, ln_eps: f64, rng: &mut ChaCha8Rng) -> Result<Self> {
        let mut m = Self::zeros(d_src, d_hidden, d_tgt, ln_eps)?;
        let bound1 = libm::sqrt(6.0 / (d_src + d_hidden) as f64);
        m.w1.as_mut_slice()
            .iter_mut()
            .for_each(|w| *w = rng::uniform(rng, -bound1, bound1));
        let bound2 = libm::sqrt(6.0 / (d_hidden + d_tgt) as f64);
        m.w2.as_mut_slice()
            .iter_mut()
            .for_each(|w| *w = rng::uniform(rng, -bound2, bound2));
        Ok(m)
    }

    /// Checks shapes and finiteness of a deserialized model.
    pub fn validate(&self) -> Result<()> {
        let (d_src, d_hidden, d_tgt) = (self.w1.rows(), self.w1.cols(), self.w2.cols());
        let checks = [
            (self.w2.rows(), d_hidden, "W2 rows"),
            (self.b1.len(), d_hidden, "b1"),
            (self.ln_gain.len(), d_hidden, "ln_gain"),
            (self.ln_bias.len(), d_hidden, "ln_bias"),
            (self.b2.len(), d_tgt, "b2"),
        ];
        for (actual, expected, context) in checks {
            if actual != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual,
                    context,
                });
            }
        }
        if d_src == 0 || d_hidden == 0 || d_tgt == 0 {
            return Err(Error::InvalidInput("network dimensions must be positive".into()));
        }
        if !(self.ln_eps > 0.0) {
            return Err(Error::InvalidInput("ln_eps must be positive".into()));
        }
        for (name, group) in PARAM_GROUP_NAMES.iter().zip(self.groups()) {
            if group.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite((*name).into()));
            }
        }
        Ok(())
    }

    pub fn d_src(&self) -> usize {
        self.w1.rows()
    }

    pub fn d_hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn d_tgt(&self) -> usize {
        self.w2.cols()
    }

    pub fn parameter_count(&self) -> usize {
        self.groups().iter().map(|g| g.len()).sum()
    }

    pub fn groups(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice(),
            &self.b1,
            &self.ln_gain,
            &self.ln_bias,
            self.w2.as_slice(),
            &self.b2,
        ]
    }

    pub fn groups_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            &mut self.ln_gain,
            &mut self.ln_bias,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64], mode: Mode<'_>) -> Result<(Vec<f64>, Cache)> {
        self.forward_batch(x, 1, mode)
    }

    /// Eval-mode prediction for one input.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x, Mode::Eval)?.0)
    }

    /// Forward pass over `batch` sample-major inputs. In train mode the mask
    /// must cover `batch * d_src` units.
    pub fn forward_batch(&self, x: &[f64], batch: usize, mode: Mode<'_>) -> Result<(Vec<f64>, Cache)> {
        let (d_src, d_h, d_tgt) = (self.d_src(), self.d_hidden(), self.d_tgt());
        if x.len() != batch * d_src {
            return Err(Error::DimensionMismatch {
                expected: batch * d_src,
                actual: x.len(),
                context: "forward input",
            });
        }
        let input_scale: Vec<f64> = match mode {
            Mode::Eval => vec![1.0; x.len()],
            Mode::Train(mask) => {
                if mask.len() != x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: x.len(),
                        actual: mask.len(),
                        context: "dropout mask",
                    });
                }
                mask.scales().collect()
            }
        };
        let dropped: Vec<f64> = x.iter().zip(&input_scale).map(|(v, s)| v * s).collect();

        let mut h = Vec::with_capacity(batch * d_h);
        for _ in 0..batch {
            h.extend_from_slice(&self.b1);
        }
        linalg::gemm_nn(&dropped, self.w1.as_slice(), &mut h, batch, d_src, d_h);

        let mut xhat = h;
        let mut rstd = Vec::with_capacity(batch);
        let mut activations = vec![0.0; batch * d_h];
        for (row, act) in xhat.chunks_exact_mut(d_h).zip(activations.chunks_exact_mut(d_h)) {
            let mean = row.iter().sum::<f64>() / d_h as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d_h as f64;
            let r = 1.0 / libm::sqrt(var + self.ln_eps);
            rstd.push(r);
            for j in 0..d_h {
                row[j] = (row[j] - mean) * r;
                act[j] = libm::tanh(self.ln_gain[j] * row[j] + self.ln_bias[j]);
            }
        }

        let mut y = Vec::with_capacity(batch * d_tgt);
        for _ in 0..batch {
            y.extend_from_slice(&self.b2);
        }
        linalg::gemm_nn(&activations, self.w2.as_slice(), &mut y, batch, d_h, d_tgt);

        Ok((
            y,
            Cache {
                batch,
                input_scale,
                dropped,
                xhat,
                rstd,
                activations,
                shape: (d_src, d_h, d_tgt),
            },
        ))
    }

    /// Exact gradients of `Σ grad_y · y` for the pass recorded in `cache`.
    pub fn backward(&self, cache: &Cache, grad_y: &[f64]) -> Result<Gradients> {
        let (d_src, d_h, d_tgt) = (self.d_src(), self.d_hidden(), self.d_tgt());
        if cache.shape != (d_src, d_h, d_tgt) {
            return Err(Error::InvalidInput("cache was produced by a different network shape".into()));
        }
        let batch = cache.batch;
        if grad_y.len() != batch * d_tgt {
            return Err(Error::DimensionMismatch {
                expected: batch * d_tgt,
                actual: grad_y.len(),
                context: "output gradient",
            });
        }

        let mut g = Gradients {
            w1: Matrix::zeros(d_src, d_h),
            b1: vec![0.0; d_h],
            ln_gain: vec![0.0; d_h],
            ln_bias: vec![0.0; d_h],
            w2: Matrix::zeros(d_h, d_tgt),
            b2: vec![0.0; d_tgt],
            input: vec![0.0; batch * d_src],
        };

        for row in grad_y.chunks_exact(d_tgt) {
            g.b2.iter_mut().zip(row).for_each(|(b, v)| *b += v);
        }
        linalg::gemm_tn(&cache.activations, grad_y, g.w2.as_mut_slice(), batch, d_h, d_tgt);

        let mut grad_h = vec![0.0; batch * d_h];
        let w2t = self.w2.transpose();
        linalg::gemm_nn(grad_y, w2t.as_slice(), &mut grad_h, batch, d_tgt, d_h);

        let mut dxhat = vec![0.0; d_h];
        for b in 0..batch {
            let a = &cache.activations[b * d_h..(b + 1) * d_h];
            let xhat = &cache.xhat[b * d_h..(b + 1) * d_h];
            let gh = &mut grad_h[b * d_h..(b + 1) * d_h];
            // gh holds dL/da on entry, dL/dh on exit
            for j in 0..d_h {
                let dln = gh[j] * (1.0 - a[j] * a[j]);
                g.ln_gain[j] += dln * xhat[j];
                g.ln_bias[j] += dln;
                dxhat[j] = dln * self.ln_gain[j];
            }
            let mean_d = dxhat.iter().sum::<f64>() / d_h as f64;
            let mean_dx = linalg::dot(&dxhat, xhat) / d_h as f64;
            let r = cache.rstd[b];
            for j in 0..d_h {
                gh[j] = r * (dxhat[j] - mean_d - xhat[j] * mean_dx);
            }
            g.b1.iter_mut().zip(gh.iter()).for_each(|(bv, v)| *bv += v);
        }
        linalg::gemm_tn(&cache.dropped, &grad_h, g.w1.as_mut_slice(), batch, d_src, d_h);
        linalg::gemm_nt(&grad_h, self.w1.as_slice(), &mut g.input, batch, d_h, d_src);
        g.input
            .iter_mut()
            .zip(&cache.input_scale)
            .for_each(|(v, s)| *v *= s);
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MlpHomogenizer {
        // 2 → 2 → 1 network, computed by hand below
        let mut m = MlpHomogenizer::zeros(2, 2, 1, 1e-5).unwrap();
        m.w1 = Matrix::from_vec(2, 2, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        m.b1 = vec![0.5, 0.0];
        m.ln_gain = vec![1.0, 0.5];
        m.ln_bias = vec![0.0, 0.1];
        m.w2 = Matrix::from_vec(2, 1, vec![2.0, -1.0]).unwrap();
        m.b2 = vec![0.25];
        m
    }

    #[test]
    fn hand_computed_forward() {
        // x = [1, 0]: h = [1.5, -1], mean 0.25, var 1.5625
        let r = 1.0 / libm::sqrt(1.5625 + 1e-5);
        let xhat = [1.25 * r, -1.25 * r];
        let a = [libm::tanh(xhat[0]), libm::tanh(0.5 * xhat[1] + 0.1)];
        let expected = 2.0 * a[0] - a[1] + 0.25;
        let y = tiny().predict(&[1.0, 0.0]).unwrap();
        assert!((y[0] - expected).abs() < 1e-12, "{} vs {}", y[0], expected);
    }

    #[test]
    fn zero_network_outputs_b2() {
        let m = MlpHomogenizer::zeros(3, 4, 2, 1e-5).unwrap();
        assert_eq!(m.predict(&[1.0, -2.0, 3.0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn eval_ignores_dropout() {
        let m = tiny();
        let mask = DropoutMask::new(vec![false, true], 0.5).unwrap();
        let (y_eval, _) = m.forward(&[1.0, 2.0], Mode::Eval).unwrap();
        let (y_train, _) = m.forward(&[1.0, 2.0], Mode::Train(&mask)).unwrap();
        // a dropped coordinate plus rescaling changes the train output only
        assert_ne!(y_eval, y_train);
        let (y_kept, _) = m.forward(&[0.0, 4.0], Mode::Eval).unwrap();
        assert!((y_train[0] - y_kept[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_upstream_gradient() {
        let m = tiny();
        let (_, cache) = m.forward(&[1.0, 0.3], Mode::Eval).unwrap();
        let g = m.backward(&cache, &[0.0]).unwrap();
        assert!(g.groups().iter().all(|grp| grp.iter().all(|&v| v == 0.0)));
        assert!(g.input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradients_are_linear_in_upstream() {
        let m = tiny();
        let (_, cache) = m.forward(&[1.0, 0.3], Mode::Eval).unwrap();
        let g1 = m.backward(&cache, &[0.7]).unwrap();
        let g2 = m.backward(&cache, &[1.4]).unwrap();
        for (a, b) in g1.groups().iter().zip(g2.groups()) {
            for (x, y) in a.iter().zip(b) {
                assert!((2.0 * x - y).abs() <= 1e-15 * y.abs().max(1.0));
            }
        }
    }

    #[test]
    fn shape_errors() {
        let m = tiny();
        assert!(m.forward(&[1.0], Mode::Eval).is_err());
        let mask = DropoutMask::all_kept(3);
        assert!(m.forward(&[1.0, 0.0], Mode::Train(&mask)).is_err());
        let (_, cache) = m.forward(&[1.0, 0.0], Mode::Eval).unwrap();
        let other = MlpHomogenizer::zeros(2, 3, 1, 1e-5).unwrap();
        assert!(other.backward(&cache, &[1.0]).is_err());
        assert!(m.backward(&cache, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn parameter_count_matches_layout() {
        let m = MlpHomogenizer::zeros(50, 300, 768, 1e-5).unwrap();
        assert_eq!(m.parameter_count(), 247_068);
    }

    #[test]
    fn validate_catches_inconsistent_shapes() {
        let mut m = tiny();
        assert!(m.validate().is_ok());
        m.b1.push(0.0);
        assert!(m.validate().is_err());
        let mut m = tiny();
        m.b2[0] = f64::INFINITY;
        assert!(matches!(m.validate(), Err(Error::NonFinite(_))));
    }
}
