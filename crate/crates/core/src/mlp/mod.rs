//! The feedforward homogenizer and its from-scratch training loop.

mod model;
mod train;

pub use model::{
    Cache, DropoutMask, Gradients, MlpHomogenizer, Mode, DEFAULT_HIDDEN, DEFAULT_LN_EPS, PARAM_GROUP_NAMES,
};
pub use train::{dataset_mse, export_homogenized, split_indices, train, EpochStats, TrainConfig, TrainOutcome};
