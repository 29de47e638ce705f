use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const DEFAULT_CONTINUATION_PREFIX: &str = "##";
pub const DEFAULT_UNKNOWN_TOKEN: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

/// WordPiece vocabulary. A token's id is its position in the token list.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: BTreeMap<String, u32>,
    continuation_prefix: String,
    unknown_token: String,
    special_tokens: BTreeSet<String>,
}

impl Vocab {
    /// Vocabulary with the BERT conventions: `##` continuation prefix,
    /// `[UNK]` unknown token and `[CLS]`/`[SEP]` as special tokens.
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_options(
            tokens,
            DEFAULT_CONTINUATION_PREFIX,
            DEFAULT_UNKNOWN_TOKEN,
            [CLS, SEP],
        )
    }

    pub fn with_options<I, S, P>(
        tokens: I,
        continuation_prefix: &str,
        unknown_token: &str,
        special_tokens: P,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
        P: IntoIterator,
        P::Item: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut ids = BTreeMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() {
                return Err(Error::InvalidVocab(format!("empty token at id {i}")));
            }
            let id = u32::try_from(i).map_err(|_| Error::InvalidVocab("too many tokens".into()))?;
            if ids.insert(tok.clone(), id).is_some() {
                return Err(Error::InvalidVocab(format!("duplicate token `{tok}` at id {i}")));
            }
        }
        let mut special: BTreeSet<String> = special_tokens.into_iter().map(Into::into).collect();
        special.insert(CLS.to_string());
        special.insert(SEP.to_string());
        for tok in special.iter().chain(core::iter::once(&unknown_token.to_string())) {
            if !ids.contains_key(tok) {
                return Err(Error::InvalidVocab(format!("required token `{tok}` missing")));
            }
        }
        Ok(Self {
            tokens,
            ids,
            continuation_prefix: continuation_prefix.to_string(),
            unknown_token: unknown_token.to_string(),
            special_tokens: special,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn continuation_prefix(&self) -> &str {
        &self.continuation_prefix
    }

    pub fn unknown_token(&self) -> &str {
        &self.unknown_token
    }

    pub fn special_tokens(&self) -> &BTreeSet<String> {
        &self.special_tokens
    }

    pub fn is_special(&self, token: &str) -> bool {
        self.special_tokens.contains(token)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requires_specials_and_unique_tokens() {
        assert!(Vocab::new(["[CLS]", "[SEP]", "[UNK]", "a"]).is_ok());
        assert!(matches!(Vocab::new(["[CLS]", "[SEP]", "a"]), Err(Error::InvalidVocab(_))));
        assert!(matches!(
            Vocab::new(["[CLS]", "[SEP]", "[UNK]", "a", "a"]),
            Err(Error::InvalidVocab(_))
        ));
    }

    #[test]
    fn custom_specials_must_be_present() {
        let err = Vocab::with_options(["[CLS]", "[SEP]", "[UNK]"], "##", "[UNK]", ["[PAD]"]);
        assert!(err.is_err());
        let v = Vocab::with_options(["[PAD]", "[CLS]", "[SEP]", "[UNK]"], "##", "[UNK]", ["[PAD]"]).unwrap();
        assert!(v.is_special("[PAD]"));
        assert_eq!(v.id("[CLS]"), Some(1));
    }
}
