//! File formats and the `homogenizer` command line on top of
//! [`homogenizer_core`].

pub mod cli;
pub mod embeddings;
pub mod entities;
pub mod error;
pub mod lists;
pub mod model_file;
pub mod paired;
pub mod sequence_file;

pub use error::{Error, Result};
