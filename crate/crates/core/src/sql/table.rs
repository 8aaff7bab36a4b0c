use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::value::{parse_number, Value};
use crate::digest;

/// Name under which an uploaded dataset is queried.
pub const SESSION_TABLE: &str = "uploaded_data";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Number,
    Text,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("empty header")]
    EmptyHeader,
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("column `{column}` holds a value that does not match kind {kind:?}")]
    KindMismatch { column: String, kind: ColumnKind },
}

/// Immutable columnar table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    name: String,
    columns: Vec<Column>,
    row_count: usize,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: Vec<Column>) -> Result<Self, TableError> {
        if columns.is_empty() {
            return Err(TableError::EmptyHeader);
        }
        for (i, c) in columns.iter().enumerate() {
            if c.name.trim().is_empty() {
                return Err(TableError::EmptyHeader);
            }
            if columns[..i].iter().any(|d| d.name.eq_ignore_ascii_case(&c.name)) {
                return Err(TableError::DuplicateColumn(c.name.clone()));
            }
            let ok = c.values.iter().all(|v| {
                matches!((c.kind, v), (_, Value::Null) | (ColumnKind::Number, Value::Number(_)) | (ColumnKind::Text, Value::Text(_)))
            });
            if !ok {
                return Err(TableError::KindMismatch { column: c.name.clone(), kind: c.kind });
            }
        }
        let row_count = columns[0].values.len();
        if let Some(c) = columns.iter().find(|c| c.values.len() != row_count) {
            return Err(TableError::Ragged { row: row_count.min(c.values.len()), found: c.values.len(), expected: row_count });
        }
        Ok(Self { name: name.into(), columns, row_count })
    }

    /// Build the session table from a header and string records.
    ///
    /// A column is numeric iff every non-empty cell parses as a number; empty
    /// (or all-whitespace) cells become null.
    pub fn from_records(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Self, TableError> {
        if header.is_empty() || header.iter().all(|h| h.trim().is_empty()) {
            return Err(TableError::EmptyHeader);
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != header.len() {
                return Err(TableError::Ragged { row: i + 1, found: r.len(), expected: header.len() });
            }
        }
        let columns = header
            .into_iter()
            .enumerate()
            .map(|(ci, name)| {
                let cells = rows.iter().map(|r| r[ci].as_str());
                let numeric = cells.clone().filter(|c| !c.trim().is_empty()).all(|c| parse_number(c).is_some());
                let values = cells
                    .map(|c| {
                        if c.trim().is_empty() {
                            Value::Null
                        } else if numeric {
                            Value::Number(parse_number(c).unwrap_or_default())
                        } else {
                            Value::Text(c.to_string())
                        }
                    })
                    .collect();
                let kind = if numeric { ColumnKind::Number } else { ColumnKind::Text };
                Column { name: name.trim().to_string(), kind, values }
            })
            .collect();
        Table::new(SESSION_TABLE, columns)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    /// Case-insensitive column lookup.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.column_index(name).map(|i| &self.columns[i])
    }

    pub fn value(&self, col: usize, row: usize) -> &Value {
        &self.columns[col].values[row]
    }

    /// `(name, kind)` pairs in declaration order.
    pub fn schema(&self) -> Vec<(String, ColumnKind)> {
        self.columns.iter().map(|c| (c.name.clone(), c.kind)).collect()
    }

    pub fn digest(&self) -> String {
        digest::digest_of(self)
    }

    pub fn describe(&self) -> String {
        format!("{} ({} rows, {} columns)", self.name, self.row_count, self.columns.len())
    }
}
