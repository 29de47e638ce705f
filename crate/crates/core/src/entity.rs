use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A linked entity mention. `start`/`end` are char offsets into the
/// question, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityRecord {
    pub key: String,
    pub preferred_name: String,
    pub start: usize,
    pub end: usize,
    pub definition_key: Option<String>,
}

impl EntityRecord {
    pub fn new(key: impl Into<String>, preferred_name: impl Into<String>, start: usize, end: usize) -> Self {
        Self {
            key: key.into(),
            preferred_name: preferred_name.into(),
            start,
            end,
            definition_key: None,
        }
    }

    pub fn with_definition(mut self, definition_key: impl Into<String>) -> Self {
        self.definition_key = Some(definition_key.into());
        self
    }

    /// Key used to look the entity up in a definition-embedding table.
    pub fn definition_lookup_key(&self) -> &str {
        self.definition_key.as_deref().unwrap_or(&self.key)
    }
}

/// Checks spans against the question and sorts the records by start offset.
pub fn validate_entities(question: &str, mut entities: Vec<EntityRecord>) -> Result<Vec<EntityRecord>> {
    let len = question.chars().count();
    for e in &entities {
        if e.key.is_empty() {
            return Err(Error::InvalidSpan("entity with empty key".into()));
        }
        if e.start >= e.end || e.end > len {
            return Err(Error::InvalidSpan(format!(
                "entity `{}` span [{}, {}) out of range for question of {} chars",
                e.key, e.start, e.end, len
            )));
        }
    }
    entities.sort_by_key(|e| (e.start, e.end));
    for pair in entities.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(Error::InvalidSpan(format!(
                "entities `{}` [{}, {}) and `{}` [{}, {}) overlap",
                pair[0].key, pair[0].start, pair[0].end, pair[1].key, pair[1].start, pair[1].end
            )));
        }
    }
    Ok(entities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn sorts_by_start() {
        let q = "What is the main cause of HIV-1 infection in children?";
        let ents = vec![
            EntityRecord::new("children", "children", 45, 53),
            EntityRecord::new("main", "main", 12, 16),
        ];
        let out = validate_entities(q, ents).unwrap();
        assert_eq!(out[0].key, "main");
        assert_eq!(out[1].key, "children");
    }

    #[test]
    fn rejects_overlap_and_out_of_range() {
        let q = "abcdefghijklmnop";
        let overlap = vec![EntityRecord::new("a", "a", 5, 9), EntityRecord::new("b", "b", 7, 12)];
        assert!(matches!(validate_entities(q, overlap), Err(Error::InvalidSpan(_))));
        let oob = vec![EntityRecord::new("a", "a", 5, 40)];
        assert!(validate_entities(q, oob).is_err());
        let empty = vec![EntityRecord::new("a", "a", 5, 5)];
        assert!(validate_entities(q, empty).is_err());
        let touching = vec![EntityRecord::new("a", "a", 0, 3), EntityRecord::new("b", "b", 3, 4)];
        assert!(validate_entities(q, touching).is_ok());
    }
}
