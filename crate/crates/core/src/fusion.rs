//! External-knowledge vectors and the augmented input layouts.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::entity::{validate_entities, EntityRecord};
use crate::error::{Error, Result};
use crate::rng;
use crate::table::EmbeddingTable;
use crate::tokenizer::{token_ids, tokenize, tokenize_with_offsets};
use crate::vocab::{Vocab, CLS, SEP};

pub const DEFAULT_MAX_LEN: usize = 512;
pub const BERTRAM_SEPARATOR: &str = "/";

/// Which inputs a fused vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FuseSource {
    Both,
    HomogenizedOnly,
    DefinitionOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fused {
    pub table: EmbeddingTable,
    /// Parallel to `table.names()`.
    pub sources: Vec<FuseSource>,
}

/// Averages homogenized and definition vectors per key, falling back to
/// whichever one exists. Definitions are looked up under the key itself.
pub fn fuse<S: AsRef<str>>(homogenized: &EmbeddingTable, definitions: &EmbeddingTable, keys: &[S]) -> Result<Fused> {
    let mapped: Vec<(&str, Option<&str>)> = keys.iter().map(|k| (k.as_ref(), None)).collect();
    fuse_mapped(homogenized, definitions, &mapped)
}

/// Like [`fuse`], but each key may name a different definition-table key.
pub fn fuse_mapped(
    homogenized: &EmbeddingTable,
    definitions: &EmbeddingTable,
    keys: &[(&str, Option<&str>)],
) -> Result<Fused> {
    if homogenized.dim() != definitions.dim() {
        return Err(Error::DimensionMismatch {
            expected: homogenized.dim(),
            actual: definitions.dim(),
            context: "definition table dimension",
        });
    }
    let mut table = EmbeddingTable::with_capacity(homogenized.dim(), keys.len())?;
    let mut sources = Vec::with_capacity(keys.len());
    for &(key, def_key) in keys {
        let h = homogenized.get(key);
        let d = definitions.get(def_key.unwrap_or(key));
        match (h, d) {
            (Some(h), Some(d)) => {
                let mean: Vec<f64> = h.iter().zip(d).map(|(a, b)| (a + b) / 2.0).collect();
                table.insert(key, &mean)?;
                sources.push(FuseSource::Both);
            }
            (Some(h), None) => {
                table.insert(key, h)?;
                sources.push(FuseSource::HomogenizedOnly);
            }
            (None, Some(d)) => {
                table.insert(key, d)?;
                sources.push(FuseSource::DefinitionOnly);
            }
            (None, None) => return Err(Error::MissingKey(key.to_string())),
        }
    }
    Ok(Fused { table, sources })
}

/// Random baseline: each key gets a vector uniform in `[-1, 1]^dim` drawn
/// from its own stream, so a key's vector does not depend on the others.
pub fn random_table<S: AsRef<str>>(keys: &[S], dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if keys.is_empty() {
        return Err(Error::InvalidInput("random table needs at least one key".into()));
    }
    let mut table = EmbeddingTable::with_capacity(dim, keys.len())?;
    let mut buf = alloc::vec![0.0; dim];
    for key in keys {
        let key = key.as_ref();
        let mut r = rng::keyed_stream(seed, key);
        buf.iter_mut().for_each(|v| *v = rng::uniform(&mut r, -1.0, 1.0));
        table.insert(key, &buf)?;
    }
    Ok(table)
}

/// Stand-in for a transformer pooler output: the mean static input embedding
/// of the definition's wordpieces. Pieces that are unknown or missing from
/// `lm_table` are ignored. This is plumbing for running the pipeline without
/// a language model, not a pooler output.
pub fn static_pooler_proxy(definition: &str, lm_table: &EmbeddingTable, vocab: &Vocab, lowercase: bool) -> Result<Vec<f64>> {
    let mut acc = alloc::vec![0.0; lm_table.dim()];
    let mut n = 0usize;
    for piece in tokenize(definition, vocab, lowercase) {
        if piece == vocab.unknown_token() {
            continue;
        }
        if let Some(v) = lm_table.get(&piece) {
            acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput("definition has no embeddable tokens".into()));
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Bertram,
    Dekcor,
}

impl Layout {
    pub fn as_str(self) -> &'static str {
        match self {
            Layout::Bertram => "bertram",
            Layout::Dekcor => "dekcor",
        }
    }
}

impl core::str::FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bertram" => Ok(Layout::Bertram),
            "dekcor" => Ok(Layout::Dekcor),
            other => Err(Error::InvalidInput(format!("unknown layout `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Unit {
    Token { text: String, id: u32 },
    Vector { key: String },
}

impl Unit {
    pub fn token_text(&self) -> Option<&str> {
        match self {
            Unit::Token { text, .. } => Some(text),
            Unit::Vector { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentedSequence {
    pub units: Vec<Unit>,
    /// Units between the leading `[CLS]` and the first `[SEP]`.
    pub question_unit_count: usize,
    pub layout: Layout,
    pub max_len: usize,
}

impl AugmentedSequence {
    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn vector_keys(&self) -> impl Iterator<Item = &str> {
        self.units.iter().filter_map(|u| match u {
            Unit::Vector { key } => Some(key.as_str()),
            Unit::Token { .. } => None,
        })
    }

    /// Tokens of the question block, with inserted vectors and separators
    /// removed in the BERTRAM layout.
    pub fn question_tokens(&self) -> Vec<&str> {
        let block = &self.units[1..1 + self.question_unit_count];
        match self.layout {
            Layout::Dekcor => block.iter().filter_map(Unit::token_text).collect(),
            Layout::Bertram => {
                let mut out = Vec::new();
                let mut skip_sep = false;
                for u in block {
                    match u {
                        Unit::Vector { .. } => skip_sep = true,
                        Unit::Token { text, .. } => {
                            if skip_sep && text == BERTRAM_SEPARATOR {
                                skip_sep = false;
                                continue;
                            }
                            out.push(text.as_str());
                        }
                    }
                }
                out
            }
        }
    }

    /// Checks the structural invariants of the layout.
    pub fn validate(&self, fused: &EmbeddingTable) -> Result<()> {
        if self.units.len() > self.max_len {
            return Err(Error::SequenceTooLong {
                required: self.units.len(),
                max_len: self.max_len,
            });
        }
        if self.units.first().and_then(Unit::token_text) != Some(CLS) {
            return Err(Error::InvalidInput("sequence must start with [CLS]".into()));
        }
        if self.units.last().and_then(Unit::token_text) != Some(SEP) {
            return Err(Error::InvalidInput("sequence must end with [SEP]".into()));
        }
        if self.units.get(1 + self.question_unit_count).and_then(Unit::token_text) != Some(SEP) {
            return Err(Error::InvalidInput("question block must be closed by [SEP]".into()));
        }
        for key in self.vector_keys() {
            if !fused.contains(key) {
                return Err(Error::MissingKey(key.to_string()));
            }
        }
        Ok(())
    }
}

/// Builds augmented sequences against one vocabulary and fused table.
#[derive(Debug, Clone, Copy)]
pub struct SequenceBuilder<'a> {
    pub vocab: &'a Vocab,
    pub fused: &'a EmbeddingTable,
    pub max_len: usize,
    pub lowercase: bool,
}

struct EntityTokens {
    key: String,
    /// token index range within the question tokens
    first: usize,
    last: usize,
}

impl<'a> SequenceBuilder<'a> {
    pub fn new(vocab: &'a Vocab, fused: &'a EmbeddingTable) -> Self {
        Self {
            vocab,
            fused,
            max_len: DEFAULT_MAX_LEN,
            lowercase: true,
        }
    }

    pub fn max_len(mut self, max_len: usize) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    pub fn build<S: AsRef<str>>(
        &self,
        layout: Layout,
        question: &str,
        entities: &[EntityRecord],
        context_tokens: &[S],
    ) -> Result<AugmentedSequence> {
        match layout {
            Layout::Bertram => self.bertram(question, entities, context_tokens),
            Layout::Dekcor => self.dekcor(question, entities, context_tokens),
        }
    }

    fn token(&self, text: &str) -> Result<Unit> {
        let id = self.vocab.id(text).ok_or_else(|| Error::UnknownToken(text.to_string()))?;
        Ok(Unit::Token {
            text: text.to_string(),
            id,
        })
    }

    fn vector(&self, key: &str) -> Result<Unit> {
        if !self.fused.contains(key) {
            return Err(Error::MissingKey(key.to_string()));
        }
        Ok(Unit::Vector { key: key.to_string() })
    }

    fn question_units(&self, question: &str, entities: &[EntityRecord]) -> Result<(Vec<Unit>, Vec<EntityTokens>)> {
        let entities = validate_entities(question, entities.to_vec())?;
        let tokens = tokenize_with_offsets(question, self.vocab, self.lowercase);
        let mut spans: Vec<EntityTokens> = Vec::with_capacity(entities.len());
        for e in &entities {
            let mut hit = tokens
                .iter()
                .enumerate()
                .filter(|(_, t)| t.start < e.end && e.start < t.end)
                .map(|(i, _)| i);
            let first = hit.next().ok_or_else(|| {
                Error::InvalidSpan(format!("entity `{}` covers no question tokens", e.key))
            })?;
            let last = hit.last().unwrap_or(first);
            if let Some(prev) = spans.last() {
                if first <= prev.last {
                    return Err(Error::InvalidSpan(format!(
                        "entities `{}` and `{}` share a word",
                        prev.key, e.key
                    )));
                }
            }
            spans.push(EntityTokens {
                key: e.key.clone(),
                first,
                last,
            });
        }
        let units = tokens
            .iter()
            .map(|t| self.token(&t.text))
            .collect::<Result<Vec<_>>>()?;
        Ok((units, spans))
    }

    fn finish<S: AsRef<str>>(
        &self,
        mut units: Vec<Unit>,
        question_unit_count: usize,
        layout: Layout,
        context_tokens: &[S],
    ) -> Result<AugmentedSequence> {
        let fixed = units.len() + 1;
        if fixed > self.max_len {
            return Err(Error::SequenceTooLong {
                required: fixed,
                max_len: self.max_len,
            });
        }
        let budget = self.max_len - fixed;
        let context = &context_tokens[..context_tokens.len().min(budget)];
        let ids = token_ids(context, self.vocab)?;
        units.extend(context.iter().zip(ids).map(|(t, id)| Unit::Token {
            text: t.as_ref().to_string(),
            id,
        }));
        units.push(self.token(SEP)?);
        Ok(AugmentedSequence {
            units,
            question_unit_count,
            layout,
            max_len: self.max_len,
        })
    }

    /// `[CLS] q… ⟨vec⟩ / entity tokens … q… [SEP] context [SEP]`
    pub fn bertram<S: AsRef<str>>(
        &self,
        question: &str,
        entities: &[EntityRecord],
        context_tokens: &[S],
    ) -> Result<AugmentedSequence> {
        let (q, spans) = self.question_units(question, entities)?;
        let mut units = Vec::with_capacity(q.len() + 2 * spans.len() + 3 + context_tokens.len());
        units.push(self.token(CLS)?);
        let mut next = spans.iter().peekable();
        for (i, u) in q.into_iter().enumerate() {
            if let Some(span) = next.peek() {
                if span.first == i {
                    units.push(self.vector(&span.key)?);
                    units.push(self.token(BERTRAM_SEPARATOR)?);
                    next.next();
                }
            }
            units.push(u);
        }
        let question_unit_count = units.len() - 1;
        units.push(self.token(SEP)?);
        self.finish(units, question_unit_count, Layout::Bertram, context_tokens)
    }

    /// `[CLS] q [SEP] ⟨vec⟩… [SEP] context [SEP]`; the entity block and its
    /// separator are omitted when there are no entities.
    pub fn dekcor<S: AsRef<str>>(
        &self,
        question: &str,
        entities: &[EntityRecord],
        context_tokens: &[S],
    ) -> Result<AugmentedSequence> {
        let (q, spans) = self.question_units(question, entities)?;
        let question_unit_count = q.len();
        let mut units = Vec::with_capacity(q.len() + spans.len() + 4 + context_tokens.len());
        units.push(self.token(CLS)?);
        units.extend(q);
        units.push(self.token(SEP)?);
        if !spans.is_empty() {
            for span in &spans {
                units.push(self.vector(&span.key)?);
            }
            units.push(self.token(SEP)?);
        }
        self.finish(units, question_unit_count, Layout::Dekcor, context_tokens)
    }
}

pub fn build_bertram<S: AsRef<str>>(
    question: &str,
    entities: &[EntityRecord],
    context_tokens: &[S],
    fused: &EmbeddingTable,
    vocab: &Vocab,
    max_len: usize,
) -> Result<AugmentedSequence> {
    SequenceBuilder::new(vocab, fused)
        .max_len(max_len)
        .bertram(question, entities, context_tokens)
}

pub fn build_dekcor<S: AsRef<str>>(
    question: &str,
    entities: &[EntityRecord],
    context_tokens: &[S],
    fused: &EmbeddingTable,
    vocab: &Vocab,
    max_len: usize,
) -> Result<AugmentedSequence> {
    SequenceBuilder::new(vocab, fused)
        .max_len(max_len)
        .dekcor(question, entities, context_tokens)
}
