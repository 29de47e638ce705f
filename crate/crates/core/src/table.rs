use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Insertion-ordered map from name to a fixed-dimension vector.
///
/// Vectors are stored contiguously, row `i` belonging to `names()[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    names: Vec<String>,
    index: BTreeMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            names: Vec::new(),
            index: BTreeMap::new(),
            data: Vec::new(),
        })
    }

    pub fn with_capacity(dim: usize, capacity: usize) -> Result<Self> {
        let mut table = Self::new(dim)?;
        table.names.reserve(capacity);
        table.data.reserve(capacity * dim);
        Ok(table)
    }

    /// Builds a table from `(name, vector)` pairs, validating every entry.
    pub fn from_rows<N, V, I>(dim: usize, rows: I) -> Result<Self>
    where
        N: Into<String>,
        V: AsRef<[f64]>,
        I: IntoIterator<Item = (N, V)>,
    {
        let mut table = Self::new(dim)?;
        for (name, vector) in rows {
            table.insert(name, vector.as_ref())?;
        }
        Ok(table)
    }

    pub fn insert(&mut self, name: impl Into<String>, vector: &[f64]) -> Result<()> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::EmptyName);
        }
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: vector.len(),
                context: "table entry",
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(name));
        }
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateName(name));
        }
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.position(name).map(|i| self.row(i))
    }

    /// Like [`get`](Self::get) but reports the missing key.
    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.get(name).ok_or_else(|| Error::MissingKey(name.to_string()))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, &[f64])> + '_ {
        self.names
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(n, v)| (n.as_str(), v))
    }

    /// Row-major view of all vectors.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Same names and order, new row-major data of dimension `dim`.
    pub(crate) fn map_rows_flat(&self, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * self.len());
        Self {
            dim,
            names: self.names.clone(),
            index: self.index.clone(),
            data,
        }
    }
}
