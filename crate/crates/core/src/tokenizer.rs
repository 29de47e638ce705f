//! WordPiece tokenization.
//!
//! Text is split on whitespace, every punctuation character becomes a word of
//! its own, and each word is then decomposed greedily, longest match first,
//! into vocabulary pieces. Pieces after the first carry the vocabulary's
//! continuation prefix. A word with no complete decomposition, or longer than
//! [`MAX_WORD_CHARS`], becomes a single unknown token.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::vocab::Vocab;

pub const MAX_WORD_CHARS: usize = 100;

/// A whitespace/punctuation delimited word. Offsets are char positions in
/// the original text, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// A wordpiece together with the char span of the word it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// ASCII punctuation plus the common Unicode punctuation blocks.
pub fn is_punctuation(c: char) -> bool {
    if c.is_ascii() {
        return c.is_ascii_punctuation();
    }
    matches!(c,
        '\u{00A1}' | '\u{00A7}' | '\u{00AB}' | '\u{00B6}' | '\u{00B7}' | '\u{00BB}' | '\u{00BF}'
        | '\u{2010}'..='\u{2027}'
        | '\u{2030}'..='\u{205E}'
        | '\u{3001}'..='\u{3003}'
        | '\u{3008}'..='\u{3011}'
        | '\u{3014}'..='\u{301F}'
        | '\u{FF01}'..='\u{FF0F}'
    )
}

/// Splits `text` into words, optionally lowercasing.
pub fn pre_tokenize(text: &str, lowercase: bool) -> Vec<Word> {
    let mut words = Vec::new();
    let mut current = String::new();
    let mut start = 0;

    let flush = |current: &mut String, start: usize, end: usize, words: &mut Vec<Word>| {
        if !current.is_empty() {
            words.push(Word {
                text: core::mem::take(current),
                start,
                end,
            });
        }
    };

    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            flush(&mut current, start, i, &mut words);
        } else if is_punctuation(c) {
            flush(&mut current, start, i, &mut words);
            words.push(Word {
                text: c.to_string(),
                start: i,
                end: i + 1,
            });
        } else {
            if current.is_empty() {
                start = i;
            }
            if lowercase {
                current.extend(c.to_lowercase());
            } else {
                current.push(c);
            }
        }
    }
    let n = text.chars().count();
    flush(&mut current, start, n, &mut words);
    words
}

/// Greedy longest-match-first decomposition of one word.
pub fn wordpiece(word: &str, vocab: &Vocab) -> Vec<String> {
    let unknown = || alloc::vec![vocab.unknown_token().to_string()];
    // char boundaries, including the end of the string
    let bounds: Vec<usize> = word
        .char_indices()
        .map(|(b, _)| b)
        .chain(core::iter::once(word.len()))
        .collect();
    let n_chars = bounds.len() - 1;
    if n_chars == 0 {
        return Vec::new();
    }
    if n_chars > MAX_WORD_CHARS {
        return unknown();
    }

    let prefix = vocab.continuation_prefix();
    let mut pieces = Vec::new();
    let mut candidate = String::new();
    let mut start = 0;
    while start < n_chars {
        let mut found = None;
        for end in (start + 1..=n_chars).rev() {
            candidate.clear();
            if start > 0 {
                candidate.push_str(prefix);
            }
            candidate.push_str(&word[bounds[start]..bounds[end]]);
            if vocab.contains(&candidate) {
                found = Some(end);
                break;
            }
        }
        match found {
            Some(end) => {
                pieces.push(candidate.clone());
                start = end;
            }
            None => return unknown(),
        }
    }
    pieces
}

pub fn tokenize(text: &str, vocab: &Vocab, lowercase: bool) -> Vec<String> {
    tokenize_with_offsets(text, vocab, lowercase)
        .into_iter()
        .map(|t| t.text)
        .collect()
}

/// Tokenizes and keeps, for every piece, the char span of its source word.
pub fn tokenize_with_offsets(text: &str, vocab: &Vocab, lowercase: bool) -> Vec<Token> {
    let mut out = Vec::new();
    for word in pre_tokenize(text, lowercase) {
        for piece in wordpiece(&word.text, vocab) {
            out.push(Token {
                text: piece,
                start: word.start,
                end: word.end,
            });
        }
    }
    out
}

pub fn token_ids<S: AsRef<str>>(tokens: &[S], vocab: &Vocab) -> Result<Vec<u32>> {
    tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            vocab.id(t).ok_or_else(|| Error::UnknownToken(t.to_string()))
        })
        .collect()
}

pub fn tokens_from_ids(ids: &[u32], vocab: &Vocab) -> Result<Vec<String>> {
    ids.iter()
        .map(|&id| {
            vocab
                .token(id)
                .map(str::to_string)
                .ok_or_else(|| Error::InvalidInput(alloc::format!("token id {id} out of range")))
        })
        .collect()
}

/// Joins pieces back into words by stripping continuation prefixes.
pub fn detokenize_words<S: AsRef<str>>(tokens: &[S], prefix: &str) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    for t in tokens {
        let t = t.as_ref();
        match (t.strip_prefix(prefix), words.last_mut()) {
            (Some(rest), Some(last)) if !prefix.is_empty() => last.push_str(rest),
            _ => words.push(t.to_string()),
        }
    }
    words
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn vocab() -> Vocab {
        Vocab::new([
            "[PAD]", "[CLS]", "[SEP]", "[UNK]", "cy", "##stein", "##e", "##s", "c", "what", "is",
            "the", "main", "cause", "of", "hiv", "-", "1", "infection", "in", "children", "?",
        ])
        .unwrap()
    }

    #[test]
    fn cysteine_subwords() {
        assert_eq!(tokenize("cysteine", &vocab(), true), ["cy", "##stein", "##e"]);
    }

    #[test]
    fn running_question() {
        let toks = tokenize("What is the main cause of HIV-1 infection in children?", &vocab(), true);
        assert_eq!(
            toks,
            ["what", "is", "the", "main", "cause", "of", "hiv", "-", "1", "infection", "in", "children", "?"]
        );
    }

    #[test]
    fn empty_and_whitespace() {
        assert!(tokenize("", &vocab(), true).is_empty());
        assert!(tokenize(" \t\n", &vocab(), true).is_empty());
    }

    #[test]
    fn undecomposable_word_is_one_unknown() {
        assert_eq!(tokenize("cyx main", &vocab(), true), ["[UNK]", "main"]);
    }

    #[test]
    fn overlong_word_is_unknown() {
        let long: String = core::iter::repeat('c').take(MAX_WORD_CHARS + 1).collect();
        let v = Vocab::new(["[CLS]", "[SEP]", "[UNK]", "c", "##c"]).unwrap();
        assert_eq!(tokenize(&long, &v, false), ["[UNK]"]);
        let ok: String = core::iter::repeat('c').take(MAX_WORD_CHARS).collect();
        assert_eq!(tokenize(&ok, &v, false).len(), MAX_WORD_CHARS);
    }

    #[test]
    fn case_is_kept_without_lowercasing() {
        assert_eq!(tokenize("Main", &vocab(), false), ["[UNK]"]);
    }

    #[test]
    fn offsets_are_char_positions() {
        let toks = tokenize_with_offsets("é HIV-1", &vocab(), true);
        let spans: Vec<(usize, usize)> = toks.iter().map(|t| (t.start, t.end)).collect();
        assert_eq!(spans, vec![(0, 1), (2, 5), (5, 6), (6, 7)]);
    }

    #[test]
    fn ids_round_trip() {
        let v = vocab();
        let toks = tokenize("cysteine", &v, true);
        let ids = token_ids(&toks, &v).unwrap();
        assert_eq!(tokens_from_ids(&ids, &v).unwrap(), toks);
        assert_eq!(token_ids(&["[CLS]"], &v).unwrap(), [1]);
        assert!(matches!(token_ids(&["nope"], &v), Err(Error::UnknownToken(_))));
    }

    #[test]
    fn detokenize_joins_continuations() {
        assert_eq!(detokenize_words(&["cy", "##stein", "##e", "is"], "##"), ["cysteine", "is"]);
    }
}
