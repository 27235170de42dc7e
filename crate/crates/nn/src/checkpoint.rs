use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    /// `[rows, cols]`; vectors are stored as `[n, 1]`.
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Serialisable bag of named parameter arrays plus free-form metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub metadata: serde_json::Map<String, serde_json::Value>,
    pub arrays: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn read<R: Read>(reader: R) -> Result<Self> {
        serde_json::from_reader(reader).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn array(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }
}
