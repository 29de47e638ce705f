//! Alignment targets: an entity's target is the mean of the LM input
//! embeddings of its preferred name's wordpieces.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::table::EmbeddingTable;
use crate::tokenizer::tokenize;
use crate::vocab::Vocab;

/// Aligned `(key, source vector, target vector)` triples, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedDataset {
    keys: Vec<String>,
    src_dim: usize,
    tgt_dim: usize,
    sources: Vec<f64>,
    targets: Vec<f64>,
}

impl PairedDataset {
    pub fn new(src_dim: usize, tgt_dim: usize) -> Result<Self> {
        if src_dim == 0 || tgt_dim == 0 {
            return Err(Error::InvalidInput("paired dataset dimensions must be positive".into()));
        }
        Ok(Self {
            keys: Vec::new(),
            src_dim,
            tgt_dim,
            sources: Vec::new(),
            targets: Vec::new(),
        })
    }

    pub fn push(&mut self, key: impl Into<String>, x: &[f64], z: &[f64]) -> Result<()> {
        if x.len() != self.src_dim {
            return Err(Error::DimensionMismatch {
                expected: self.src_dim,
                actual: x.len(),
                context: "paired source",
            });
        }
        if z.len() != self.tgt_dim {
            return Err(Error::DimensionMismatch {
                expected: self.tgt_dim,
                actual: z.len(),
                context: "paired target",
            });
        }
        self.keys.push(key.into());
        self.sources.extend_from_slice(x);
        self.targets.extend_from_slice(z);
        Ok(())
    }

    /// Pairs rows of two tables sharing keys; order follows `sources`.
    pub fn from_tables(sources: &EmbeddingTable, targets: &EmbeddingTable) -> Result<Self> {
        let mut out = Self::new(sources.dim(), targets.dim())?;
        for (key, x) in sources.iter() {
            out.push(key, x, targets.require(key)?)?;
        }
        Ok(out)
    }

    /// Splits back into source and target tables keyed identically.
    pub fn to_tables(&self) -> Result<(EmbeddingTable, EmbeddingTable)> {
        let mut src = EmbeddingTable::with_capacity(self.src_dim, self.len())?;
        let mut tgt = EmbeddingTable::with_capacity(self.tgt_dim, self.len())?;
        for i in 0..self.len() {
            src.insert(self.keys[i].clone(), self.source(i))?;
            tgt.insert(self.keys[i].clone(), self.target(i))?;
        }
        Ok((src, tgt))
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut out = Self {
            keys: Vec::with_capacity(indices.len()),
            src_dim: self.src_dim,
            tgt_dim: self.tgt_dim,
            sources: Vec::with_capacity(indices.len() * self.src_dim),
            targets: Vec::with_capacity(indices.len() * self.tgt_dim),
        };
        for &i in indices {
            out.keys.push(self.keys[i].clone());
            out.sources.extend_from_slice(self.source(i));
            out.targets.extend_from_slice(self.target(i));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn src_dim(&self) -> usize {
        self.src_dim
    }

    pub fn tgt_dim(&self) -> usize {
        self.tgt_dim
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn source(&self, i: usize) -> &[f64] {
        &self.sources[i * self.src_dim..(i + 1) * self.src_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.tgt_dim..(i + 1) * self.tgt_dim]
    }

    pub fn sources_flat(&self) -> &[f64] {
        &self.sources
    }

    pub fn targets_flat(&self) -> &[f64] {
        &self.targets
    }
}

/// Mean of the LM embeddings of `preferred_name`'s wordpieces.
///
/// A name that tokenizes to nothing, to the unknown token, or to a piece
/// absent from `lm_table` has no target.
pub fn build_target(
    preferred_name: &str,
    lm_table: &EmbeddingTable,
    vocab: &Vocab,
    lowercase: bool,
) -> Result<Vec<f64>> {
    let pieces = tokenize(preferred_name, vocab, lowercase);
    if pieces.is_empty() {
        return Err(Error::InvalidInput("preferred name has no tokens".into()));
    }
    let mut acc = vec![0.0; lm_table.dim()];
    for piece in &pieces {
        if piece == vocab.unknown_token() {
            return Err(Error::UnknownToken(preferred_name.to_string()));
        }
        let v = lm_table.require(piece)?;
        acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
    }
    let n = pieces.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

/// An entity left out of a target set, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub key: String,
    pub reason: Error,
}

/// One pair per entity with a resolvable target, in input order. Failures
/// are reported, not fatal; an empty result is.
pub fn build_target_set<K, N>(
    entities: &[(K, N)],
    kge_table: &EmbeddingTable,
    lm_table: &EmbeddingTable,
    vocab: &Vocab,
    lowercase: bool,
) -> Result<(PairedDataset, Vec<Skipped>)>
where
    K: AsRef<str>,
    N: AsRef<str>,
{
    let mut pairs = PairedDataset::new(kge_table.dim(), lm_table.dim())?;
    let mut skipped = Vec::new();
    for (key, name) in entities {
        let key = key.as_ref();
        let resolved = kge_table
            .require(key)
            .and_then(|x| build_target(name.as_ref(), lm_table, vocab, lowercase).map(|z| (x, z)));
        match resolved {
            Ok((x, z)) => pairs.push(key, x, &z)?,
            Err(reason) => skipped.push(Skipped {
                key: key.to_string(),
                reason,
            }),
        }
    }
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no entity produced a target".into()));
    }
    Ok((pairs, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> Vocab {
        Vocab::new(["[CLS]", "[SEP]", "[UNK]", "cy", "##stein", "##e", "main", "up", "##down", "orphan"]).unwrap()
    }

    fn lm() -> EmbeddingTable {
        EmbeddingTable::from_rows(
            2,
            [
                ("cy", [3.0, 0.0]),
                ("##stein", [0.0, 3.0]),
                ("##e", [3.0, 3.0]),
                ("main", [0.5, -0.5]),
                ("up", [1.0, 2.0]),
                ("##down", [-1.0, -2.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn cysteine_target_is_subword_mean() {
        let z = build_target("cysteine", &lm(), &vocab(), true).unwrap();
        assert_eq!(z, [2.0, 2.0]);
    }

    #[test]
    fn single_token_is_unchanged() {
        assert_eq!(build_target("main", &lm(), &vocab(), true).unwrap(), [0.5, -0.5]);
    }

    #[test]
    fn opposite_subwords_cancel() {
        assert_eq!(build_target("updown", &lm(), &vocab(), true).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn missing_and_unknown_pieces_fail() {
        assert!(matches!(build_target("orphan", &lm(), &vocab(), true), Err(Error::MissingKey(_))));
        assert!(matches!(build_target("zzz", &lm(), &vocab(), true), Err(Error::UnknownToken(_))));
        assert!(build_target("", &lm(), &vocab(), true).is_err());
    }

    #[test]
    fn target_set_skips_and_reports() {
        let kge = EmbeddingTable::from_rows(1, [("C1", [1.0]), ("C2", [2.0]), ("C3", [3.0])]).unwrap();
        let ents = [("C1", "cysteine"), ("C2", "zzz"), ("C3", "main")];
        let (pairs, skipped) = build_target_set(&ents, &kge, &lm(), &vocab(), true).unwrap();
        assert_eq!(pairs.keys(), ["C1", "C3"]);
        assert_eq!(pairs.target(1), [0.5, -0.5]);
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].key, "C2");

        let none = [("C2", "zzz")];
        assert!(build_target_set(&none, &kge, &lm(), &vocab(), true).is_err());
    }
}
