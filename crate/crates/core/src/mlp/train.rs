use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mlp::model::{DropoutMask, Gradients, MlpHomogenizer, Mode, DEFAULT_HIDDEN, DEFAULT_LN_EPS};
use crate::rng::{self, STREAM_DROPOUT, STREAM_INIT, STREAM_SHUFFLE, STREAM_SPLIT};
use crate::table::EmbeddingTable;
use crate::targets::PairedDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_p: f64,
    /// Coupled L2 coefficient added to the raw gradient of W1 and W2.
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub holdout_fraction: f64,
    pub hidden_dim: usize,
    pub ln_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 256,
            dropout_p: 0.25,
            weight_decay: 0.001,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            holdout_fraction: 0.1,
            hidden_dim: DEFAULT_HIDDEN,
            ln_eps: DEFAULT_LN_EPS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout_p must be in [0, 1)");
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return bad("weight_decay must be non-negative");
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must be in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad("holdout_fraction must be in (0, 1)");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim must be positive");
        }
        if !(self.ln_eps > 0.0) {
            return bad("ln_eps must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Sample-weighted mean of the train-mode minibatch losses.
    pub train_mse: f64,
    /// Eval-mode loss on the holdout split.
    pub holdout_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the lowest holdout loss (the initialization when no
    /// epoch ran).
    pub model: MlpHomogenizer,
    pub history: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub train_indices: Vec<usize>,
    pub holdout_indices: Vec<usize>,
}

/// Seeded train/holdout split; both index lists are ascending.
pub fn split_indices(n: usize, holdout_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_hold = libm::round(n as f64 * holdout_fraction) as usize;
    let n_hold = n_hold.max(1);
    if n < 2 || n_hold >= n {
        return Err(Error::InvalidInput(alloc::format!(
            "{n} pairs cannot be split into non-empty train and holdout sets"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng::stream(seed, STREAM_SPLIT), &mut perm);
    let mut holdout = perm[..n_hold].to_vec();
    let mut train = perm[n_hold..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();
    Ok((train, holdout))
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    beta1_pow: f64,
    beta2_pow: f64,
}

impl Adam {
    fn new(model: &MlpHomogenizer) -> Self {
        let zeros: Vec<Vec<f64>> = model.groups().iter().map(|g| vec![0.0; g.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            beta1_pow: 1.0,
            beta2_pow: 1.0,
        }
    }

    fn step(&mut self, model: &mut MlpHomogenizer, grads: &Gradients, cfg: &TrainConfig) {
        self.beta1_pow *= cfg.adam_beta1;
        self.beta2_pow *= cfg.adam_beta2;
        let c1 = 1.0 - self.beta1_pow;
        let c2 = 1.0 - self.beta2_pow;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        for (gi, (param, grad)) in model.groups_mut().into_iter().zip(grads.groups()).enumerate() {
            let m = &mut self.m[gi];
            let v = &mut self.v[gi];
            for k in 0..param.len() {
                let g = grad[k];
                m[k] = b1 * m[k] + (1.0 - b1) * g;
                v[k] = b2 * v[k] + (1.0 - b2) * g * g;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                param[k] -= cfg.learning_rate * m_hat / (libm::sqrt(v_hat) + cfg.adam_eps);
            }
        }
    }
}

/// Indices of the weight-matrix groups, the only ones that receive L2.
const DECAYED_GROUPS: [usize; 2] = [0, 4];

/// Minibatch Adam on the mean squared error between network output and
/// target, returning the best-holdout snapshot.
///
/// Deterministic for a given `(pairs, config)`; see [`crate::rng`] for the
/// stream assignment.
pub fn train(pairs: &PairedDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let (train_idx, holdout_idx) = split_indices(pairs.len(), config.holdout_fraction, config.seed)?;
    let (d_src, d_tgt) = (pairs.src_dim(), pairs.tgt_dim());

    let mut model = MlpHomogenizer::init(
        d_src,
        config.hidden_dim,
        d_tgt,
        config.ln_eps,
        &mut rng::stream(config.seed, STREAM_INIT),
    )?;
    let holdout = pairs.subset(&holdout_idx);

    let mut shuffle_rng = rng::stream(config.seed, STREAM_SHUFFLE);
    let mut dropout_rng = rng::stream(config.seed, STREAM_DROPOUT);
    let mut adam = Adam::new(&model);

    let mut best = model.clone();
    let mut best_epoch = None;
    let mut best_loss = f64::INFINITY;
    let mut history = Vec::with_capacity(config.epochs);

    let mut order = train_idx.clone();
    let mut xb = Vec::with_capacity(config.batch_size * d_src);
    let mut zb = Vec::with_capacity(config.batch_size * d_tgt);

    for epoch in 0..config.epochs {
        rng::shuffle(&mut shuffle_rng, &mut order);
        let mut loss_sum = 0.0;
        for (batch_no, chunk) in order.chunks(config.batch_size).enumerate() {
            xb.clear();
            zb.clear();
            for &i in chunk {
                xb.extend_from_slice(pairs.source(i));
                zb.extend_from_slice(pairs.target(i));
            }
            let bsz = chunk.len();
            let mask = DropoutMask::draw(&mut dropout_rng, bsz * d_src, config.dropout_p)?;
            let (y, cache) = model.forward_batch(&xb, bsz, Mode::Train(&mask))?;

            let denom = (bsz * d_tgt) as f64;
            let mut sq = 0.0;
            let grad_y: Vec<f64> = y
                .iter()
                .zip(&zb)
                .map(|(p, t)| {
                    let d = p - t;
                    sq += d * d;
                    2.0 * d / denom
                })
                .collect();
            let loss = sq / denom;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_no });
            }
            loss_sum += loss * bsz as f64;

            let mut grads = model.backward(&cache, &grad_y)?;
            if config.weight_decay > 0.0 {
                let params = model.groups();
                let groups = grads.groups_mut();
                for &gi in &DECAYED_GROUPS {
                    groups[gi]
                        .iter_mut()
                        .zip(params[gi])
                        .for_each(|(g, w)| *g += config.weight_decay * w);
                }
            }
            adam.step(&mut model, &grads, config);
        }

        let holdout_mse = dataset_mse(&model, &holdout)?;
        if !holdout_mse.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: order.len().div_ceil(config.batch_size),
            });
        }
        history.push(EpochStats {
            epoch,
            train_mse: loss_sum / order.len() as f64,
            holdout_mse,
        });
        if holdout_mse < best_loss {
            best_loss = holdout_mse;
            best_epoch = Some(epoch);
            best = model.clone();
        }
    }

    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        train_indices: train_idx,
        holdout_indices: holdout_idx,
    })
}

const EVAL_CHUNK: usize = 1024;

/// Eval-mode mean squared error over a dataset: mean over pairs of the mean
/// per-coordinate squared error.
pub fn dataset_mse(model: &MlpHomogenizer, pairs: &PairedDataset) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let (d_src, d_tgt) = (pairs.src_dim(), pairs.tgt_dim());
    let mut total = 0.0;
    let mut start = 0;
    while start < pairs.len() {
        let end = (start + EVAL_CHUNK).min(pairs.len());
        let x = &pairs.sources_flat()[start * d_src..end * d_src];
        let (y, _) = model.forward_batch(x, end - start, Mode::Eval)?;
        let z = &pairs.targets_flat()[start * d_tgt..end * d_tgt];
        total += y.iter().zip(z).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
        start = end;
    }
    Ok(total / (pairs.len() * d_tgt) as f64)
}

/// Eval-mode image of `keys` under the network, keyed identically.
pub fn export_homogenized<S: AsRef<str>>(
    model: &MlpHomogenizer,
    kge_table: &EmbeddingTable,
    keys: &[S],
) -> Result<EmbeddingTable> {
    if kge_table.dim() != model.d_src() {
        return Err(Error::DimensionMismatch {
            expected: model.d_src(),
            actual: kge_table.dim(),
            context: "source table dimension",
        });
    }
    let mut out = EmbeddingTable::with_capacity(model.d_tgt(), keys.len())?;
    for chunk in keys.chunks(EVAL_CHUNK) {
        let mut x = Vec::with_capacity(chunk.len() * model.d_src());
        for key in chunk {
            x.extend_from_slice(kge_table.require(key.as_ref())?);
        }
        let (y, _) = model.forward_batch(&x, chunk.len(), Mode::Eval)?;
        for (key, row) in chunk.iter().zip(y.chunks_exact(model.d_tgt())) {
            out.insert(key.as_ref(), row)?;
        }
    }
    Ok(out)
}
