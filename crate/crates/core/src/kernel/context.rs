use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::content::Content;
use crate::digest;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub producer: String,
    pub content: Content,
}

/// Append-only record of the intake and every handoff so far.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SharedContext {
    user_inputs: BTreeMap<String, Value>,
    entries: Vec<ContextEntry>,
}

impl SharedContext {
    pub fn new(user_inputs: BTreeMap<String, Value>) -> Self {
        Self { user_inputs, entries: Vec::new() }
    }

    pub fn user_inputs(&self) -> &BTreeMap<String, Value> {
        &self.user_inputs
    }

    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn append(&mut self, producer: impl Into<String>, content: Content) {
        self.entries.push(ContextEntry { producer: producer.into(), content });
    }

    pub fn latest_from(&self, producer: &str) -> Option<&Content> {
        self.entries.iter().rev().find(|e| e.producer == producer).map(|e| &e.content)
    }

    pub fn digest(&self) -> String {
        digest::digest_of(self)
    }

    /// Labeled plain-text blocks: the intake first, then entries in production order.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.user_inputs.is_empty() {
            out.push_str("[intake]\n");
            for (k, v) in &self.user_inputs {
                match v {
                    Value::String(s) => {
                        let _ = writeln!(out, "{k}: {s}");
                    }
                    other => {
                        let _ = writeln!(out, "{k}: {other}");
                    }
                }
            }
        }
        for (i, e) in self.entries.iter().enumerate() {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "[context {} from {}]", i + 1, e.producer);
            out.push_str(e.content.render().trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn render_is_ordered_and_labeled() {
        let mut inputs = BTreeMap::new();
        inputs.insert("age".into(), json!(76));
        inputs.insert("goal".into(), json!("routine"));
        let mut ctx = SharedContext::new(inputs);
        ctx.append("assessment", "A".into());
        ctx.append("care-plan", "B".into());
        assert_eq!(ctx.render(), "[intake]\nage: 76\ngoal: routine\n\n[context 1 from assessment]\nA\n\n[context 2 from care-plan]\nB\n");
    }

    #[test]
    fn digest_changes_on_append() {
        let mut ctx = SharedContext::default();
        let d0 = ctx.digest();
        ctx.append("a", "x".into());
        assert_ne!(d0, ctx.digest());
    }
}
