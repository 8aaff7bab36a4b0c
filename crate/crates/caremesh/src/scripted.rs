//! Fixture-driven model backend. Every request must match an unconsumed
//! fixture entry; a miss is an error, never a default reply.

use std::fs;
use std::path::Path;
use std::sync::Mutex;

use caremesh_core::kernel::RunTranscript;
use caremesh_core::provider::{CompletionRequest, MediaKind, Provider, ProviderError};
use caremesh_core::Content;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Match {
    Step { role_label: String, step: usize },
    Prompt { prompt_contains: String },
}

impl Match {
    fn accepts(&self, req: &CompletionRequest, prompt: &str) -> bool {
        match self {
            Match::Step { role_label, step } => req.meta.role_label.as_deref() == Some(role_label.as_str()) && req.meta.step == Some(*step),
            Match::Prompt { prompt_contains } => prompt.contains(prompt_contains.as_str()),
        }
    }
}

/// Plain text, or any other JSON value which is replayed as compact JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Text(String),
    Structured(Value),
}

impl Response {
    pub fn render(&self) -> String {
        match self {
            Response::Text(s) => s.clone(),
            Response::Structured(v) => v.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    #[serde(rename = "match")]
    pub matcher: Match,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<Response>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inject_error: Option<String>,
}

impl FixtureEntry {
    pub fn step(role_label: &str, step: usize, response: impl Into<String>) -> Self {
        Self {
            matcher: Match::Step { role_label: role_label.into(), step },
            response: Some(Response::Text(response.into())),
            inject_error: None,
        }
    }

    pub fn structured(role_label: &str, step: usize, response: Value) -> Self {
        Self {
            matcher: Match::Step { role_label: role_label.into(), step },
            response: Some(Response::Structured(response)),
            inject_error: None,
        }
    }

    pub fn prompt(needle: &str, response: impl Into<String>) -> Self {
        Self {
            matcher: Match::Prompt { prompt_contains: needle.into() },
            response: Some(Response::Text(response.into())),
            inject_error: None,
        }
    }

    pub fn failing(matcher: Match, error: &str) -> Self {
        Self { matcher, response: None, inject_error: Some(error.into()) }
    }
}

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("cannot read fixture `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed fixture: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("fixture entry {0} has neither a response nor an injected error")]
    EmptyEntry(usize),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedFixture {
    pub entries: Vec<FixtureEntry>,
    /// Attachment kinds the scripted model claims to accept. All of them when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capabilities: Option<Vec<MediaKind>>,
}

impl ScriptedFixture {
    pub fn new(entries: Vec<FixtureEntry>) -> Self {
        Self { entries, capabilities: None }
    }

    pub fn text_only(mut self) -> Self {
        self.capabilities = Some(Vec::new());
        self
    }

    pub fn from_json(text: &str) -> Result<Self, FixtureError> {
        let fixture: ScriptedFixture = serde_json::from_str(text)?;
        if let Some(i) = fixture.entries.iter().position(|e| e.response.is_none() && e.inject_error.is_none()) {
            return Err(FixtureError::EmptyEntry(i));
        }
        Ok(fixture)
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        let text = fs::read_to_string(path).map_err(|source| FixtureError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// A fixture that replays the step outputs of a finished transcript.
    pub fn record(transcript: &RunTranscript) -> Self {
        let entries = transcript
            .steps
            .iter()
            .enumerate()
            .filter_map(|(i, s)| {
                let response = match s.output.as_ref()? {
                    Content::Text(t) => Response::Text(t.clone()),
                    Content::Structured(v) => Response::Structured(v.clone()),
                };
                Some(FixtureEntry {
                    matcher: Match::Step { role_label: s.role.clone(), step: i },
                    response: Some(response),
                    inject_error: None,
                })
            })
            .collect();
        Self::new(entries)
    }
}

fn injected(name: &str) -> ProviderError {
    match name {
        "FixtureExhausted" => ProviderError::FixtureExhausted("injected".into()),
        "SchemaViolation" => ProviderError::SchemaViolation { path: "$".into(), reason: "injected".into() },
        "InvalidRequest" => ProviderError::InvalidRequest("injected".into()),
        "ProviderError" => ProviderError::Backend("injected fault".into()),
        other => ProviderError::Backend(format!("injected {other}")),
    }
}

fn describe(req: &CompletionRequest, prompt: &str) -> String {
    match (&req.meta.role_label, req.meta.step) {
        (Some(r), Some(s)) => format!("no entry for role_label `{r}` step {s}"),
        _ => {
            let head: String = prompt.chars().take(60).collect();
            format!("no entry matches prompt `{head}`")
        }
    }
}

struct State {
    used: Vec<bool>,
    log: Vec<CompletionRequest>,
}

/// Replays a [`ScriptedFixture`]. Use one instance per run.
pub struct ScriptedProvider {
    fixture: ScriptedFixture,
    state: Mutex<State>,
}

impl ScriptedProvider {
    pub fn new(fixture: ScriptedFixture) -> Self {
        let used = vec![false; fixture.entries.len()];
        Self { fixture, state: Mutex::new(State { used, log: Vec::new() }) }
    }

    pub fn load(path: &Path) -> Result<Self, FixtureError> {
        ScriptedFixture::load(path).map(Self::new)
    }

    /// Every request seen so far, in order.
    pub fn requests(&self) -> Vec<CompletionRequest> {
        self.state.lock().expect("fixture state poisoned").log.clone()
    }

    pub fn remaining(&self) -> usize {
        self.state.lock().expect("fixture state poisoned").used.iter().filter(|u| !**u).count()
    }
}

impl Provider for ScriptedProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        req.validate()?;
        let prompt = req.prompt_text();
        let mut st = self.state.lock().expect("fixture state poisoned");
        st.log.push(req.clone());
        let hit = self.fixture.entries.iter().enumerate().find(|(i, e)| !st.used[*i] && e.matcher.accepts(req, &prompt));
        let Some((i, entry)) = hit else {
            return Err(ProviderError::FixtureExhausted(describe(req, &prompt)));
        };
        st.used[i] = true;
        if let Some(name) = &entry.inject_error {
            return Err(injected(name));
        }
        Ok(entry.response.as_ref().map(Response::render).unwrap_or_default())
    }

    fn supports(&self, kind: MediaKind) -> bool {
        self.fixture.capabilities.as_ref().is_none_or(|c| c.contains(&kind))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use caremesh_core::provider::Message;

    fn req(text: &str) -> CompletionRequest {
        CompletionRequest::new(vec![Message::user(text)])
    }

    #[test]
    fn prompt_match_and_miss() {
        let p = ScriptedProvider::new(ScriptedFixture::new(vec![FixtureEntry::prompt("sundowning", "R1")]));
        assert_eq!(p.complete(&req("tips for sundowning")).unwrap(), "R1");
        assert!(matches!(p.complete(&req("tips for sundowning")), Err(ProviderError::FixtureExhausted(_))));
        assert_eq!(p.requests().len(), 2);
    }

    #[test]
    fn step_match_needs_label_and_step() {
        let p = ScriptedProvider::new(ScriptedFixture::new(vec![FixtureEntry::step("triage", 0, "plan")]));
        assert!(p.complete(&req("x").with_meta("triage", 1)).is_err());
        assert_eq!(p.complete(&req("x").with_meta("triage", 0)).unwrap(), "plan");
        assert_eq!(p.remaining(), 0);
    }

    #[test]
    fn injected_error() {
        let entry = FixtureEntry::failing(Match::Prompt { prompt_contains: "x".into() }, "ProviderError");
        let p = ScriptedProvider::new(ScriptedFixture::new(vec![entry]));
        assert_eq!(p.complete(&req("x")).unwrap_err().code(), "ProviderError");
    }

    #[test]
    fn structured_response_is_compact_json_in_authored_order() {
        let json = r#"{"entries":[{"match":{"prompt_contains":"page"},"response":{"summary":"s","key_points":["k"]}}]}"#;
        let p = ScriptedProvider::new(ScriptedFixture::from_json(json).unwrap());
        assert_eq!(p.complete(&req("page")).unwrap(), r#"{"summary":"s","key_points":["k"]}"#);
    }

    #[test]
    fn entry_without_response_is_rejected() {
        let json = r#"{"entries":[{"match":{"prompt_contains":"x"}}]}"#;
        assert!(matches!(ScriptedFixture::from_json(json), Err(FixtureError::EmptyEntry(0))));
    }

    #[test]
    fn capabilities() {
        let all = ScriptedProvider::new(ScriptedFixture::default());
        assert!(all.supports(MediaKind::Video));
        let none = ScriptedProvider::new(ScriptedFixture::default().text_only());
        assert!(!none.supports(MediaKind::Image));
    }
}
