//! Augmented sequences as JSON lines:
//!
//! ```json
//! {"id":"q1","layout":"dekcor","max_len":512,"question_unit_count":13,
//!  "units":[{"t":"tok","s":"[CLS]","id":101},{"t":"vec","k":"C0019693"}],
//!  "vectors":{"C0019693":[0.1,0.2]}}
//! ```
//!
//! With inline vectors each `vec` unit carries `"v":[...]` and the
//! `vectors` side-table is omitted.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use homogenizer_core::fusion::{AugmentedSequence, Layout, Unit};
use homogenizer_core::EmbeddingTable;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t")]
pub enum UnitJson {
    #[serde(rename = "tok")]
    Token { s: String, id: u32 },
    #[serde(rename = "vec")]
    Vector {
        k: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        v: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub id: String,
    pub layout: String,
    pub max_len: usize,
    pub question_unit_count: usize,
    pub units: Vec<UnitJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<BTreeMap<String, Vec<f64>>>,
}

impl SequenceRecord {
    /// Serializable form of `seq`, resolving vectors from `fused`.
    pub fn new(id: &str, seq: &AugmentedSequence, fused: &EmbeddingTable, inline_vectors: bool) -> Result<Self> {
        let mut side = BTreeMap::new();
        let mut units = Vec::with_capacity(seq.units.len());
        for u in &seq.units {
            units.push(match u {
                Unit::Token { text, id } => UnitJson::Token {
                    s: text.clone(),
                    id: *id,
                },
                Unit::Vector { key } => {
                    let v = fused.require(key)?.to_vec();
                    if inline_vectors {
                        UnitJson::Vector { k: key.clone(), v: Some(v) }
                    } else {
                        side.entry(key.clone()).or_insert(v);
                        UnitJson::Vector { k: key.clone(), v: None }
                    }
                }
            });
        }
        Ok(Self {
            id: id.to_string(),
            layout: seq.layout.as_str().to_string(),
            max_len: seq.max_len,
            question_unit_count: seq.question_unit_count,
            units,
            vectors: (!inline_vectors).then_some(side),
        })
    }

    pub fn to_sequence(&self) -> Result<AugmentedSequence> {
        let layout: Layout = self.layout.parse()?;
        let units = self
            .units
            .iter()
            .map(|u| match u {
                UnitJson::Token { s, id } => Unit::Token { text: s.clone(), id: *id },
                UnitJson::Vector { k, .. } => Unit::Vector { key: k.clone() },
            })
            .collect();
        Ok(AugmentedSequence {
            units,
            question_unit_count: self.question_unit_count,
            layout,
            max_len: self.max_len,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sequence serialization cannot fail")
    }
}

pub fn write_sequences<W: Write>(records: &[SequenceRecord], w: &mut W) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", r.to_json())?;
    }
    Ok(())
}

pub fn save_sequences(records: &[SequenceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_sequences(records, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_sequences(path: impl AsRef<Path>) -> Result<Vec<SequenceRecord>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}
