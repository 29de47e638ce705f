use homogenizer_core::linalg::Matrix;
use homogenizer_core::mlp::{dataset_mse, split_indices, train, DropoutMask, MlpHomogenizer, Mode, TrainConfig};
use homogenizer_core::rng::{self, normal};
use homogenizer_core::targets::PairedDataset;
use homogenizer_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn random_model(seed: u64, ds: usize, dh: usize, dt: usize) -> MlpHomogenizer {
    let mut r = rng::stream(seed, 600);
    let mut m = MlpHomogenizer::init(ds, dh, dt, 1e-5, &mut r).unwrap();
    for v in m.b1.iter_mut().chain(m.ln_bias.iter_mut()).chain(m.b2.iter_mut()) {
        *v = 0.3 * normal(&mut r);
    }
    for v in m.ln_gain.iter_mut() {
        *v = 1.0 + 0.3 * normal(&mut r);
    }
    m
}

fn na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Eval-mode forward written with nalgebra column vectors.
fn oracle(m: &MlpHomogenizer, x: &[f64]) -> Vec<f64> {
    let x = DVector::from_column_slice(x);
    let h = na(&m.w1).transpose() * x + DVector::from_column_slice(&m.b1);
    let mu = h.mean();
    let var = h.map(|v| (v - mu) * (v - mu)).mean();
    let a = DVector::from_fn(h.len(), |j, _| {
        (m.ln_gain[j] * (h[j] - mu) / (var + m.ln_eps).sqrt() + m.ln_bias[j]).tanh()
    });
    let y = na(&m.w2).transpose() * a + DVector::from_column_slice(&m.b2);
    y.as_slice().to_vec()
}

fn tanh_pairs(seed: u64, n: usize) -> PairedDataset {
    let mut r = rng::stream(seed, 601);
    let mut p = PairedDataset::new(4, 3).unwrap();
    for i in 0..n {
        let x: Vec<f64> = (0..4).map(|_| normal(&mut r)).collect();
        let z = [x[0].tanh() * 2.0, (x[1] * x[2]).tanh(), x[3]];
        p.push(format!("k{i}"), &x, &z).unwrap();
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eval_forward_matches_oracle(seed in 0u64..1000, ds in 1usize..10, dh in 2usize..12, dt in 1usize..10) {
        let m = random_model(seed, ds, dh, dt);
        let mut r = rng::stream(seed, 602);
        let x: Vec<f64> = (0..ds).map(|_| normal(&mut r)).collect();
        let y = m.predict(&x).unwrap();
        for (a, b) in y.iter().zip(oracle(&m, &x)) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn batched_forward_equals_rowwise(seed in 0u64..1000, batch in 1usize..9) {
        let m = random_model(seed, 5, 7, 4);
        let mut r = rng::stream(seed, 603);
        let x: Vec<f64> = (0..batch * 5).map(|_| normal(&mut r)).collect();
        let mask = DropoutMask::draw(&mut r, batch * 5, 0.3).unwrap();
        let (yb, _) = m.forward_batch(&x, batch, Mode::Train(&mask)).unwrap();
        for b in 0..batch {
            let row_mask = DropoutMask::new(mask.keep()[b * 5..(b + 1) * 5].to_vec(), 0.3).unwrap();
            let (y, _) = m.forward(&x[b * 5..(b + 1) * 5], Mode::Train(&row_mask)).unwrap();
            for (a, c) in y.iter().zip(&yb[b * 4..(b + 1) * 4]) {
                prop_assert!((a - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn split_partitions_indices(n in 2usize..500, frac in 0.05f64..0.5, seed in 0u64..100) {
        let (tr, ho) = split_indices(n, frac, seed).unwrap();
        let mut all: Vec<usize> = tr.iter().chain(&ho).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert!(!tr.is_empty() && !ho.is_empty());
        prop_assert!(tr.windows(2).all(|w| w[0] < w[1]) && ho.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!((tr.clone(), ho.clone()), split_indices(n, frac, seed).unwrap());
    }
}

#[test]
fn inverted_dropout_preserves_the_expected_input() {
    let m = random_model(1, 6, 4, 2);
    let x = [0.5, -1.5, 2.0, 1.0, -0.25, 3.0];
    let mut r = rng::stream(3, 604);
    let trials = 100_000;
    let mut sum = [0.0; 6];
    for _ in 0..trials {
        let mask = DropoutMask::draw(&mut r, 6, 0.25).unwrap();
        let (_, cache) = m.forward(&x, Mode::Train(&mask)).unwrap();
        sum.iter_mut().zip(cache.dropped_input()).for_each(|(s, v)| *s += v);
    }
    for (s, v) in sum.iter().zip(&x) {
        let mean = s / trials as f64;
        assert!((mean - v).abs() <= 0.01 * v.abs(), "{mean} vs {v}");
    }
    let (_, cache) = m.forward(&x, Mode::Eval).unwrap();
    assert_eq!(cache.dropped_input(), x);
}

#[test]
fn training_is_seed_deterministic() {
    let pairs = tanh_pairs(0, 300);
    let cfg = TrainConfig {
        epochs: 5,
        hidden_dim: 12,
        batch_size: 32,
        seed: 4,
        ..TrainConfig::default()
    };
    let a = train(&pairs, &cfg).unwrap();
    let b = train(&pairs, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
    let c = train(&pairs, &TrainConfig { seed: 5, ..cfg.clone() }).unwrap();
    assert_ne!(a.model, c.model);
}

#[test]
fn training_reduces_holdout_loss_and_keeps_best() {
    let pairs = tanh_pairs(1, 600);
    let cfg = TrainConfig {
        epochs: 20,
        hidden_dim: 24,
        batch_size: 32,
        dropout_p: 0.0,
        learning_rate: 5e-3,
        ..TrainConfig::default()
    };
    let out = train(&pairs, &cfg).unwrap();
    let first = out.history[0].holdout_mse;
    let best = out.history.iter().map(|h| h.holdout_mse).fold(f64::INFINITY, f64::min);
    assert!(best < 0.5 * first, "{first} -> {best}");
    let got = dataset_mse(&out.model, &pairs.subset(&out.holdout_indices)).unwrap();
    assert!((got - best).abs() < 1e-12);
}

#[test]
fn zero_epochs_returns_the_initialization() {
    let pairs = tanh_pairs(2, 50);
    let cfg = TrainConfig {
        epochs: 0,
        hidden_dim: 5,
        ..TrainConfig::default()
    };
    let out = train(&pairs, &cfg).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(out.best_epoch, None);
    let mut r = rng::stream(cfg.seed, rng::STREAM_INIT);
    assert_eq!(out.model, MlpHomogenizer::init(4, 5, 3, cfg.ln_eps, &mut r).unwrap());
}

#[test]
fn invalid_configs_are_rejected() {
    let pairs = tanh_pairs(3, 50);
    for cfg in [
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { dropout_p: 1.0, ..TrainConfig::default() },
        TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
        TrainConfig { holdout_fraction: 1.0, ..TrainConfig::default() },
        TrainConfig { hidden_dim: 0, ..TrainConfig::default() },
    ] {
        assert!(matches!(train(&pairs, &cfg), Err(Error::InvalidInput(_))), "{cfg:?}");
    }
}

#[test]
fn divergence_is_reported() {
    let pairs = tanh_pairs(4, 100);
    let cfg = TrainConfig {
        epochs: 50,
        hidden_dim: 8,
        learning_rate: 1e300,
        weight_decay: 1e300,
        ..TrainConfig::default()
    };
    assert!(matches!(train(&pairs, &cfg), Err(Error::Divergence { .. })));
}
