use alloc::string::String;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Output of an agent step or a context entry: free text or a structured record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Content {
    Text(String),
    Structured(Value),
}

impl Content {
    pub fn text(s: impl Into<String>) -> Self {
        Content::Text(s.into())
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Content::Text(s) => Some(s),
            Content::Structured(_) => None,
        }
    }

    /// Plain-text rendering used when the content is placed in a prompt.
    pub fn render(&self) -> String {
        match self {
            Content::Text(s) => s.clone(),
            Content::Structured(v) => serde_json::to_string_pretty(v).unwrap_or_default(),
        }
    }

    pub fn is_blank(&self) -> bool {
        match self {
            Content::Text(s) => s.trim().is_empty(),
            Content::Structured(Value::Null) => true,
            Content::Structured(Value::Object(m)) => m.is_empty(),
            Content::Structured(_) => false,
        }
    }
}

impl From<&str> for Content {
    fn from(s: &str) -> Self {
        Content::Text(s.into())
    }
}

impl From<String> for Content {
    fn from(s: String) -> Self {
        Content::Text(s)
    }
}
