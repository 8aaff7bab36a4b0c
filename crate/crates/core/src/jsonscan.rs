//! Locating a single JSON object inside prose-wrapped model output.

use alloc::vec::Vec;

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum JsonScanError {
    #[error("no JSON object found")]
    NoObject,
    #[error("expected exactly one JSON object, found {0}")]
    MultipleObjects(usize),
    #[error("unterminated JSON object starting at byte {0}")]
    Unterminated(usize),
    #[error("invalid JSON object: {0}")]
    Invalid(alloc::string::String),
}

/// Byte spans of every balanced top-level `{...}` in `text`.
///
/// Braces outside an object are prose and only `{` opens a span. Inside an
/// object, string literals are tracked with backslash escapes so braces in
/// strings do not count.
pub fn object_spans(text: &str) -> Result<Vec<(usize, usize)>, JsonScanError> {
    let bytes = text.as_bytes();
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate() {
        if depth == 0 {
            if b == b'{' {
                depth = 1;
                start = i;
            }
            continue;
        }
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    spans.push((start, i + 1));
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(JsonScanError::Unterminated(start));
    }
    Ok(spans)
}

/// The single top-level JSON object in `text`, as a string slice.
pub fn extract_json_object(text: &str) -> Result<&str, JsonScanError> {
    let spans = object_spans(text)?;
    match spans.as_slice() {
        [] => Err(JsonScanError::NoObject),
        [(s, e)] => Ok(&text[*s..*e]),
        many => Err(JsonScanError::MultipleObjects(many.len())),
    }
}

/// Extract and parse the single top-level object.
pub fn parse_json_object(text: &str) -> Result<Map<alloc::string::String, Value>, JsonScanError> {
    let raw = extract_json_object(text)?;
    match serde_json::from_str::<Value>(raw) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(JsonScanError::NoObject),
        Err(e) => Err(JsonScanError::Invalid(alloc::format!("{e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_object() {
        assert_eq!(extract_json_object(r#"{"a":1}"#), Ok(r#"{"a":1}"#));
    }

    #[test]
    fn prose_wrapped() {
        let text = "Sure! Here is the result:\n{\"summary\": \"s\", \"key_points\": [\"k\"]}\nHope that helps.";
        let m = parse_json_object(text).unwrap();
        assert_eq!(m["summary"], "s");
    }

    #[test]
    fn braces_in_strings_are_ignored() {
        let text = r#"{"a": "}{", "b": "\"}"}"#;
        assert_eq!(extract_json_object(text), Ok(text));
    }

    #[test]
    fn nested_object_is_one() {
        let text = r#"x {"a": {"b": {}}} y"#;
        assert_eq!(extract_json_object(text), Ok(r#"{"a": {"b": {}}}"#));
    }

    #[test]
    fn zero_and_two_objects_rejected() {
        assert_eq!(extract_json_object("no json here"), Err(JsonScanError::NoObject));
        assert_eq!(extract_json_object(r#"{"a":1} and {"b":2}"#), Err(JsonScanError::MultipleObjects(2)));
    }

    #[test]
    fn unterminated() {
        assert_eq!(extract_json_object(r#"{"a": 1"#), Err(JsonScanError::Unterminated(0)));
    }

    #[test]
    fn stray_closing_brace_in_prose() {
        assert_eq!(extract_json_object(r#"} {"a":1}"#), Ok(r#"{"a":1}"#));
    }
}
