use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::ProviderError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Text,
    Number,
    TextList,
}

impl FieldKind {
    pub fn describe(self) -> &'static str {
        match self {
            FieldKind::Text => "string",
            FieldKind::Number => "number",
            FieldKind::TextList => "array of strings",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub kind: FieldKind,
    pub required: bool,
}

/// Flat record schema for structured model output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub fields: Vec<FieldSpec>,
}

impl Schema {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), fields: Vec::new() }
    }

    pub fn field(mut self, name: impl Into<String>, kind: FieldKind) -> Self {
        self.fields.push(FieldSpec { name: name.into(), kind, required: true });
        self
    }

    pub fn optional(mut self, name: impl Into<String>, kind: FieldKind) -> Self {
        self.fields.push(FieldSpec { name: name.into(), kind, required: false });
        self
    }

    pub fn get(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// True when every field of `other` appears here with the same kind.
    pub fn is_superset_of(&self, other: &Schema) -> bool {
        other.fields.iter().all(|f| self.get(&f.name).is_some_and(|g| g.kind == f.kind))
    }

    /// Check a record. Unknown extra fields are allowed.
    pub fn validate(&self, record: &Map<String, Value>) -> Result<(), ProviderError> {
        for f in &self.fields {
            let Some(v) = record.get(&f.name) else {
                if f.required {
                    return Err(violation(&f.name, "missing required field"));
                }
                continue;
            };
            match (f.kind, v) {
                (FieldKind::Text, Value::String(_)) | (FieldKind::Number, Value::Number(_)) => {}
                (FieldKind::TextList, Value::Array(items)) => {
                    for (i, item) in items.iter().enumerate() {
                        if !item.is_string() {
                            return Err(violation(&format!("{}[{i}]", f.name), "expected string"));
                        }
                    }
                }
                (kind, _) => {
                    return Err(violation(&f.name, &format!("expected {}", kind.describe())));
                }
            }
        }
        Ok(())
    }
}

fn violation(path: &str, reason: &str) -> ProviderError {
    ProviderError::SchemaViolation { path: path.into(), reason: reason.into() }
}
