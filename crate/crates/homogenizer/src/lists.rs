//! Line-oriented inputs: vocabularies, key lists and name tables.

use std::fs;
use std::path::Path;

use homogenizer_core::Vocab;

use crate::error::{Error, Result};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}

/// One token per line; the line position is the token id.
pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vocab> {
    let path = path.as_ref();
    let text = read(path)?;
    let tokens: Vec<&str> = lines(&text).map(|(_, l)| l).collect();
    if let Some((line, _)) = lines(&text).find(|(_, l)| l.is_empty()) {
        return Err(Error::parse(path, line, "empty vocabulary line"));
    }
    Vocab::new(tokens).map_err(|e| Error::parse(path, 0, e.to_string()))
}

/// One key per line; blank lines are skipped.
pub fn load_keys(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = read(path)?;
    Ok(lines(&text)
        .map(|(_, l)| l.trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Tab-separated `key<TAB>preferred name` lines.
pub fn load_names(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut out = Vec::new();
    for (line, l) in lines(&text) {
        if l.trim().is_empty() {
            continue;
        }
        match l.split_once('\t') {
            Some((k, n)) if !k.is_empty() && !n.trim().is_empty() => out.push((k.to_string(), n.to_string())),
            _ => return Err(Error::parse(path, line, "expected `key<TAB>preferred name`")),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn vocab_positions_are_ids() {
        let f = file("[PAD]\n[UNK]\n[CLS]\n[SEP]\nhello\r\n");
        let v = load_vocab(f.path()).unwrap();
        assert_eq!(v.id("[CLS]"), Some(2));
        assert_eq!(v.id("hello"), Some(4));
        assert!(load_vocab(file("[UNK]\n\n[CLS]\n[SEP]\n").path()).is_err());
        assert!(load_vocab(file("[UNK]\n[CLS]\n").path()).is_err());
    }

    #[test]
    fn names_and_keys() {
        let names = load_names(file("C1\tcysteine\nC2\thiv 1 infection\n\n").path()).unwrap();
        assert_eq!(names[1], ("C2".to_string(), "hiv 1 infection".to_string()));
        assert!(load_names(file("C1 cysteine\n").path()).is_err());
        assert_eq!(load_keys(file("a\n\n b \n").path()).unwrap(), ["a", "b"]);
    }
}
