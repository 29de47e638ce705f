//! word2vec text format.
//!
//! ```text
//! <count> <dim>
//! <name> <v1> ... <v_dim>
//! ```
//!
//! Names contain no whitespace. Values are written with 17 significant
//! digits, which round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use homogenizer_core::{EmbeddingTable, Error as CoreError};

use crate::error::{Error, Result};

pub fn load_embeddings(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), path, expected_dim)
}

/// Parses a table; `origin` only labels error messages.
pub fn read_embeddings<R: BufRead>(reader: R, origin: &Path, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::io(origin, e))?,
        None => return Err(Error::parse(origin, 1, "missing header line")),
    };
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dim) = match fields.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(Error::parse(origin, 1, format!("malformed header `{header}`"))),
        },
        _ => return Err(Error::parse(origin, 1, format!("header must be `count dim`, got `{header}`"))),
    };
    if let Some(expected) = expected_dim {
        if expected != dim {
            return Err(Error::parse(
                origin,
                1,
                format!("dimension {dim} does not match expected {expected}"),
            ));
        }
    }

    let mut table = EmbeddingTable::with_capacity(dim, count).map_err(Error::Core)?;
    let mut values = Vec::with_capacity(dim);
    let mut line_no = 1;
    for line in lines {
        line_no += 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if table.len() == count {
            return Err(Error::parse(
                origin,
                line_no,
                format!("more entries than the {count} declared in the header"),
            ));
        }
        let mut parts = line.split_whitespace();
        let name = parts.next().unwrap_or_default();
        values.clear();
        for tok in parts {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(origin, line_no, format!("`{tok}` is not a number")))?;
            values.push(v);
        }
        if values.len() != dim {
            return Err(Error::parse(
                origin,
                line_no,
                format!("vector length {} ≠ dim {dim}", values.len()),
            ));
        }
        table.insert(name, &values).map_err(|e| match e {
            CoreError::DuplicateName(n) => Error::parse(origin, line_no, format!("duplicate name `{n}`")),
            CoreError::NonFinite(n) => Error::parse(origin, line_no, format!("non-finite value for `{n}`")),
            other => Error::parse(origin, line_no, other.to_string()),
        })?;
    }
    if table.len() != count {
        return Err(Error::parse(
            origin,
            line_no + 1,
            format!("truncated file: header declares {count} entries, found {}", table.len()),
        ));
    }
    Ok(table)
}

pub fn save_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_embeddings(table, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_embeddings<W: Write>(table: &EmbeddingTable, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{} {}", table.len(), table.dim())?;
    for (name, vector) in table.iter() {
        w.write_all(name.as_bytes())?;
        for v in vector {
            write!(w, " {v:.16e}")?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<EmbeddingTable> {
        read_embeddings(text.as_bytes(), Path::new("mem"), None)
    }

    fn line_of(err: Error) -> usize {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn minimal_file() {
        let t = parse("2 3\na 1 2 3\nb 0 0 1").unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("a").unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(t.get("b").unwrap(), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn short_vector_reports_line() {
        let err = parse("1 3\na 1 2").unwrap_err();
        assert!(err.to_string().contains("vector length 2 ≠ dim 3"), "{err}");
        assert_eq!(line_of(err), 2);
    }

    #[test]
    fn header_and_body_errors() {
        assert_eq!(line_of(parse("").unwrap_err()), 1);
        assert_eq!(line_of(parse("x 3\n").unwrap_err()), 1);
        assert_eq!(line_of(parse("1 0\n").unwrap_err()), 1);
        assert_eq!(line_of(parse("2 1\na 1\na 2\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("1 1\na nan\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("1 1\na 1,5\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("3 1\na 1\nb 2\n").unwrap_err()), 4);
        assert_eq!(line_of(parse("1 1\na 1\nb 2\n").unwrap_err()), 3);
        let wrong_dim = read_embeddings("1 2\na 1 2\n".as_bytes(), Path::new("mem"), Some(3));
        assert_eq!(line_of(wrong_dim.unwrap_err()), 1);
    }

    #[test]
    fn empty_table_round_trip() {
        let t = EmbeddingTable::new(4).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&t, &mut buf).unwrap();
        assert_eq!(buf, b"0 4\n");
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), t);
    }

    #[test]
    fn half_round_trips() {
        let t = EmbeddingTable::from_rows(1, [("a", [0.5])]).unwrap();
        let mut buf = Vec::new();
        write_embeddings(&t, &mut buf).unwrap();
        assert_eq!(parse(std::str::from_utf8(&buf).unwrap()).unwrap(), t);
    }
}
