//! Entity annotations, one JSON object per question:
//!
//! ```json
//! {"id":"q1","question":"...","entities":[{"key":"C0019693","preferred_name":"HIV 1 infection","start":26,"end":41}]}
//! ```
//!
//! Offsets are char positions, `end` exclusive. `definition_key` is optional.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use homogenizer_core::entity::{validate_entities, EntityRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityJson {
    pub key: String,
    pub preferred_name: String,
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct QuestionJson {
    id: String,
    question: String,
    #[serde(default)]
    entities: Vec<EntityJson>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedQuestion {
    pub id: String,
    pub question: String,
    /// Sorted by start offset.
    pub entities: Vec<EntityRecord>,
}

impl From<EntityJson> for EntityRecord {
    fn from(e: EntityJson) -> Self {
        EntityRecord {
            key: e.key,
            preferred_name: e.preferred_name,
            start: e.start,
            end: e.end,
            definition_key: e.definition_key,
        }
    }
}

impl From<&EntityRecord> for EntityJson {
    fn from(e: &EntityRecord) -> Self {
        EntityJson {
            key: e.key.clone(),
            preferred_name: e.preferred_name.clone(),
            start: e.start,
            end: e.end,
            definition_key: e.definition_key.clone(),
        }
    }
}

pub fn load_entities(path: impl AsRef<Path>) -> Result<Vec<AnnotatedQuestion>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_entities(BufReader::new(file), path)
}

pub fn read_entities<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<AnnotatedQuestion>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: QuestionJson = serde_json::from_str(&line).map_err(|e| {
            // name the question when the id is still recoverable
            let id = serde_json::from_str::<serde_json::Value>(&line)
                .ok()
                .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(str::to_string));
            match id {
                Some(id) => Error::parse(origin, i + 1, format!("question `{id}`: malformed record: {e}")),
                None => Error::parse(origin, i + 1, format!("malformed record: {e}")),
            }
        })?;
        let entities = record.entities.into_iter().map(EntityRecord::from).collect();
        let entities = validate_entities(&record.question, entities).map_err(|source| Error::Entity {
            path: origin.to_path_buf(),
            question_id: record.id.clone(),
            source,
        })?;
        out.push(AnnotatedQuestion {
            id: record.id,
            question: record.question,
            entities,
        });
    }
    Ok(out)
}
