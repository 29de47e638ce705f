//! A paired dataset on disk is two word2vec text files, sources and targets,
//! whose rows share keys in the same order.

use std::path::Path;

use homogenizer_core::targets::PairedDataset;

use crate::embeddings::{load_embeddings, save_embeddings};
use crate::error::{Error, Result};

pub fn save_paired(pairs: &PairedDataset, sources: impl AsRef<Path>, targets: impl AsRef<Path>) -> Result<()> {
    let (src, tgt) = pairs.to_tables()?;
    save_embeddings(&src, sources)?;
    save_embeddings(&tgt, targets)
}

pub fn load_paired(sources: impl AsRef<Path>, targets: impl AsRef<Path>) -> Result<PairedDataset> {
    let src = load_embeddings(sources.as_ref(), None)?;
    let tgt = load_embeddings(targets.as_ref(), None)?;
    if src.len() != tgt.len() {
        return Err(Error::Usage(format!(
            "{} has {} rows but {} has {}",
            sources.as_ref().display(),
            src.len(),
            targets.as_ref().display(),
            tgt.len()
        )));
    }
    Ok(PairedDataset::from_tables(&src, &tgt)?)
}
