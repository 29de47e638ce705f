//! JSON model files.
//!
//! ```json
//! {"kind":"linear","d_src":50,"d_tgt":768,"W":[...]}
//! {"kind":"orthogonal","d_src":10,"d_tgt":10,"W":[...]}
//! {"kind":"mlp","d_src":50,"d_hidden":300,"d_tgt":768,"ln_eps":1e-5,
//!  "params":{"W1":[...],"b1":[...],"ln_gain":[...],"ln_bias":[...],"W2":[...],"b2":[...]},
//!  "config":{...},"best_epoch":12,"history":[{"epoch":0,"train_mse":...,"holdout_mse":...}]}
//! ```
//!
//! Matrices are row-major. Floats use the shortest representation that
//! parses back to the same `f64`.

use std::fs;
use std::path::Path;

use homogenizer_core::align::{LinearMap, OrthogonalMap};
use homogenizer_core::linalg::Matrix;
use homogenizer_core::mlp::{export_homogenized, EpochStats, MlpHomogenizer, TrainConfig};
use homogenizer_core::{EmbeddingTable, Error as CoreError};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum AlignmentModel {
    Linear(LinearMap),
    Orthogonal(OrthogonalMap),
    Mlp(MlpHomogenizer),
}

impl AlignmentModel {
    pub fn kind(&self) -> &'static str {
        match self {
            AlignmentModel::Linear(_) => "linear",
            AlignmentModel::Orthogonal(_) => "orthogonal",
            AlignmentModel::Mlp(_) => "mlp",
        }
    }

    pub fn d_src(&self) -> usize {
        match self {
            AlignmentModel::Linear(m) => m.d_src(),
            AlignmentModel::Orthogonal(m) => m.dim(),
            AlignmentModel::Mlp(m) => m.d_src(),
        }
    }

    pub fn d_tgt(&self) -> usize {
        match self {
            AlignmentModel::Linear(m) => m.d_tgt(),
            AlignmentModel::Orthogonal(m) => m.dim(),
            AlignmentModel::Mlp(m) => m.d_tgt(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            AlignmentModel::Linear(m) => m.parameter_count(),
            AlignmentModel::Orthogonal(m) => m.dim() * m.dim(),
            AlignmentModel::Mlp(m) => m.parameter_count(),
        }
    }

    /// Maps the rows of `table` selected by `keys` (all rows when `None`).
    pub fn apply_table(&self, table: &EmbeddingTable, keys: Option<&[String]>) -> Result<EmbeddingTable> {
        let keys: Vec<&str> = match keys {
            Some(k) => k.iter().map(String::as_str).collect(),
            None => table.names().iter().map(String::as_str).collect(),
        };
        if table.dim() != self.d_src() {
            return Err(CoreError::DimensionMismatch {
                expected: self.d_src(),
                actual: table.dim(),
                context: "input table dimension",
            }
            .into());
        }
        let out = match self {
            AlignmentModel::Mlp(m) => export_homogenized(m, table, &keys)?,
            AlignmentModel::Linear(_) | AlignmentModel::Orthogonal(_) => {
                let mut out = EmbeddingTable::with_capacity(self.d_tgt(), keys.len())?;
                for key in keys {
                    let x = table.require(key)?;
                    let y = match self {
                        AlignmentModel::Linear(m) => m.apply(x)?,
                        AlignmentModel::Orthogonal(m) => m.apply(x)?,
                        AlignmentModel::Mlp(_) => unreachable!(),
                    };
                    out.insert(key, &y)?;
                }
                out
            }
        };
        Ok(out)
    }
}

/// Training provenance stored next to the parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelMeta {
    pub config: Option<TrainConfig>,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochStats>,
    pub ridge: Option<f64>,
    pub normalize_iters: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub model: AlignmentModel,
    pub meta: ModelMeta,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ModelJson {
    Linear(LinearJson),
    Orthogonal(LinearJson),
    Mlp(MlpJson),
}

#[derive(Debug, Serialize, Deserialize)]
struct LinearJson {
    d_src: usize,
    d_tgt: usize,
    #[serde(rename = "W")]
    w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalize_iters: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MlpParams {
    #[serde(rename = "W1")]
    w1: Vec<f64>,
    b1: Vec<f64>,
    ln_gain: Vec<f64>,
    ln_bias: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Vec<f64>,
    b2: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct ConfigJson {
    epochs: usize,
    batch_size: usize,
    dropout_p: f64,
    weight_decay: f64,
    learning_rate: f64,
    adam_beta1: f64,
    adam_beta2: f64,
    adam_eps: f64,
    seed: u64,
    holdout_fraction: f64,
    hidden_dim: usize,
    ln_eps: f64,
}

impl From<&TrainConfig> for ConfigJson {
    fn from(c: &TrainConfig) -> Self {
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            dropout_p: c.dropout_p,
            weight_decay: c.weight_decay,
            learning_rate: c.learning_rate,
            adam_beta1: c.adam_beta1,
            adam_beta2: c.adam_beta2,
            adam_eps: c.adam_eps,
            seed: c.seed,
            holdout_fraction: c.holdout_fraction,
            hidden_dim: c.hidden_dim,
            ln_eps: c.ln_eps,
        }
    }
}

impl From<ConfigJson> for TrainConfig {
    fn from(c: ConfigJson) -> Self {
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            dropout_p: c.dropout_p,
            weight_decay: c.weight_decay,
            learning_rate: c.learning_rate,
            adam_beta1: c.adam_beta1,
            adam_beta2: c.adam_beta2,
            adam_eps: c.adam_eps,
            seed: c.seed,
            holdout_fraction: c.holdout_fraction,
            hidden_dim: c.hidden_dim,
            ln_eps: c.ln_eps,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EpochJson {
    epoch: usize,
    train_mse: f64,
    holdout_mse: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct MlpJson {
    d_src: usize,
    d_hidden: usize,
    d_tgt: usize,
    ln_eps: f64,
    params: MlpParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<ConfigJson>,
    #[serde(default)]
    best_epoch: Option<usize>,
    #[serde(default)]
    history: Vec<EpochJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    normalize_iters: Option<usize>,
}

fn linear_json(w: &Matrix, meta: &ModelMeta) -> LinearJson {
    LinearJson {
        d_src: w.rows(),
        d_tgt: w.cols(),
        w: w.as_slice().to_vec(),
        ridge: meta.ridge,
        normalize_iters: meta.normalize_iters,
    }
}

impl SavedModel {
    pub fn new(model: AlignmentModel) -> Self {
        Self {
            model,
            meta: ModelMeta::default(),
        }
    }

    pub fn to_json(&self) -> String {
        let json = match &self.model {
            AlignmentModel::Linear(m) => ModelJson::Linear(linear_json(m.weights(), &self.meta)),
            AlignmentModel::Orthogonal(m) => ModelJson::Orthogonal(linear_json(m.weights(), &self.meta)),
            AlignmentModel::Mlp(m) => ModelJson::Mlp(MlpJson {
                d_src: m.d_src(),
                d_hidden: m.d_hidden(),
                d_tgt: m.d_tgt(),
                ln_eps: m.ln_eps,
                params: MlpParams {
                    w1: m.w1.as_slice().to_vec(),
                    b1: m.b1.clone(),
                    ln_gain: m.ln_gain.clone(),
                    ln_bias: m.ln_bias.clone(),
                    w2: m.w2.as_slice().to_vec(),
                    b2: m.b2.clone(),
                },
                config: self.meta.config.as_ref().map(ConfigJson::from),
                best_epoch: self.meta.best_epoch,
                history: self
                    .meta
                    .history
                    .iter()
                    .map(|h| EpochJson {
                        epoch: h.epoch,
                        train_mse: h.train_mse,
                        holdout_mse: h.holdout_mse,
                    })
                    .collect(),
                normalize_iters: self.meta.normalize_iters,
            }),
        };
        serde_json::to_string(&json).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let json: ModelJson = serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.to_path_buf(),
            source,
        })?;
        let invalid = |e: CoreError| Error::parse(origin, 0, e.to_string());
        let saved = match json {
            ModelJson::Linear(l) => {
                let w = Matrix::from_vec(l.d_src, l.d_tgt, l.w).map_err(invalid)?;
                SavedModel {
                    model: AlignmentModel::Linear(LinearMap::new(w).map_err(invalid)?),
                    meta: ModelMeta {
                        ridge: l.ridge,
                        normalize_iters: l.normalize_iters,
                        ..ModelMeta::default()
                    },
                }
            }
            ModelJson::Orthogonal(l) => {
                let w = Matrix::from_vec(l.d_src, l.d_tgt, l.w).map_err(invalid)?;
                SavedModel {
                    model: AlignmentModel::Orthogonal(OrthogonalMap::new(w).map_err(invalid)?),
                    meta: ModelMeta {
                        normalize_iters: l.normalize_iters,
                        ..ModelMeta::default()
                    },
                }
            }
            ModelJson::Mlp(m) => {
                let p = m.params;
                let model = MlpHomogenizer {
                    w1: Matrix::from_vec(m.d_src, m.d_hidden, p.w1).map_err(invalid)?,
                    b1: p.b1,
                    ln_gain: p.ln_gain,
                    ln_bias: p.ln_bias,
                    w2: Matrix::from_vec(m.d_hidden, m.d_tgt, p.w2).map_err(invalid)?,
                    b2: p.b2,
                    ln_eps: m.ln_eps,
                };
                model.validate().map_err(invalid)?;
                SavedModel {
                    model: AlignmentModel::Mlp(model),
                    meta: ModelMeta {
                        config: m.config.map(TrainConfig::from),
                        best_epoch: m.best_epoch,
                        history: m
                            .history
                            .into_iter()
                            .map(|h| EpochStats {
                                epoch: h.epoch,
                                train_mse: h.train_mse,
                                holdout_mse: h.holdout_mse,
                            })
                            .collect(),
                        ridge: None,
                        normalize_iters: m.normalize_iters,
                    },
                }
            }
        };
        Ok(saved)
    }
}

pub fn save_model(model: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = model.to_json();
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SavedModel::from_json(&text, path)
}
