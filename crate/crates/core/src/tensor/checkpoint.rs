//! Named parameter sets and their JSON checkpoint format: an ordered list
//! of shape-tagged full-precision float arrays.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedParam {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

/// Ordered collection of named parameter matrices.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamSet {
    entries: Vec<(String, DenseMatrix)>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: DenseMatrix) {
        self.entries.push((name.into(), value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseMatrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn matrices(&self) -> impl Iterator<Item = &DenseMatrix> {
        self.entries.iter().map(|(_, m)| m)
    }

    pub fn get(&self, name: &str) -> Option<&DenseMatrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.entries.iter().map(|(_, m)| m.shape()).collect()
    }

    /// Replaces all values in order; shapes must match entrywise.
    pub fn set_all(&mut self, values: Vec<DenseMatrix>) -> Result<()> {
        if values.len() != self.entries.len() {
            return Err(Error::Validation(format!(
                "expected {} parameter matrices, got {}",
                self.entries.len(),
                values.len()
            )));
        }
        for ((name, slot), value) in self.entries.iter_mut().zip(values) {
            if slot.shape() != value.shape() {
                return Err(Error::Shape(format!(
                    "parameter {name}: expected {:?}, got {:?}",
                    slot.shape(),
                    value.shape()
                )));
            }
            *slot = value;
        }
        Ok(())
    }

    pub fn to_named(&self) -> Vec<NamedParam> {
        self.entries
            .iter()
            .map(|(name, m)| NamedParam {
                name: name.clone(),
                rows: m.rows(),
                cols: m.cols(),
                data: m.data().to_vec(),
            })
            .collect()
    }

    pub fn from_named(named: Vec<NamedParam>) -> Result<Self> {
        let mut set = ParamSet::new();
        for p in named {
            set.push(p.name, DenseMatrix::from_vec(p.rows, p.cols, p.data)?);
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text =
            serde_json::to_string_pretty(&self.to_named()).expect("parameters serialize");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let named: Vec<NamedParam> = serde_json::from_str(&text)
            .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
        Self::from_named(named)
    }
}
