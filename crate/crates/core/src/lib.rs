//! Homogenization of knowledge-graph entity embeddings into a language
//! model's token-embedding space.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, IO and the command
//! line front-end live in the `homogenizer` crate.
//!
//! Pipeline:
//!
//! 1. [`targets`] tokenizes each entity's preferred name with [`tokenizer`]
//!    and averages the subword vectors of the LM lookup table.
//! 2. [`align`] fits the classical baselines (least-squares map, orthogonal
//!    Procrustes, iterative normalization) and [`mlp`] trains the
//!    one-hidden-layer homogenizer.
//! 3. [`fusion`] averages homogenized and definition vectors and lays out
//!    augmented input sequences.
//! 4. [`eval`] scores predictions against targets.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod align;
pub mod diagnostics;
pub mod entity;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod linalg;
pub mod mlp;
pub mod rng;
pub mod table;
pub mod targets;
pub mod tokenizer;
pub mod vocab;

pub use error::{Error, Result};
pub use table::EmbeddingTable;
pub use vocab::Vocab;
