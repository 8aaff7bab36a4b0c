//! Model backends: completion requests, structured output validation, embeddings.

mod embed;
mod schema;

pub use embed::{cosine, Embedder, HashedEmbedder, EMBED_DIM};
pub use schema::{FieldKind, FieldSpec, Schema};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::jsonscan;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Image,
    Audio,
    Video,
}

impl MediaKind {
    pub fn prefix(self) -> &'static str {
        match self {
            MediaKind::Image => "image/",
            MediaKind::Audio => "audio/",
            MediaKind::Video => "video/",
        }
    }

    /// Kind implied by an IANA media type, if it is one we carry.
    pub fn from_media_type(media_type: &str) -> Option<Self> {
        let lower = media_type.trim().to_ascii_lowercase();
        [MediaKind::Image, MediaKind::Audio, MediaKind::Video].into_iter().find(|k| lower.starts_with(k.prefix()))
    }
}

impl fmt::Display for MediaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MediaKind::Image => "image",
            MediaKind::Audio => "audio",
            MediaKind::Video => "video",
        })
    }
}

/// An uploaded image, audio clip or video passed through to a multimodal model.
#[derive(Clone, PartialEq, Eq)]
pub struct MediaItem {
    kind: MediaKind,
    bytes: Vec<u8>,
    media_type: String,
}

impl fmt::Debug for MediaItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MediaItem")
            .field("kind", &self.kind)
            .field("bytes", &self.bytes.len())
            .field("media_type", &self.media_type)
            .finish()
    }
}

impl MediaItem {
    pub fn new(kind: MediaKind, bytes: Vec<u8>, media_type: impl Into<String>) -> Result<Self, ProviderError> {
        let media_type = media_type.into();
        if bytes.is_empty() {
            return Err(ProviderError::InvalidRequest("media payload is empty".into()));
        }
        if MediaKind::from_media_type(&media_type) != Some(kind) {
            return Err(ProviderError::InvalidRequest(format!("media type `{media_type}` does not match kind {kind}")));
        }
        Ok(Self { kind, bytes, media_type })
    }

    /// Build from a media type alone, inferring the kind.
    pub fn from_media_type(bytes: Vec<u8>, media_type: impl Into<String>) -> Result<Self, ProviderError> {
        let media_type = media_type.into();
        let kind = MediaKind::from_media_type(&media_type)
            .ok_or_else(|| ProviderError::InvalidRequest(format!("unsupported media type `{media_type}`")))?;
        Self::new(kind, bytes, media_type)
    }

    pub fn kind(&self) -> MediaKind {
        self.kind
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn media_type(&self) -> &str {
        &self.media_type
    }
}

/// Which agent and pipeline step issued a request. Scripted fixtures match on it.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestMeta {
    pub role_label: Option<String>,
    pub step: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletionRequest {
    pub messages: Vec<Message>,
    pub attachments: Vec<MediaItem>,
    pub schema: Option<Schema>,
    pub max_tokens: u32,
    pub meta: RequestMeta,
}

pub const DEFAULT_MAX_TOKENS: u32 = 4096;

impl CompletionRequest {
    pub fn new(messages: Vec<Message>) -> Self {
        Self { messages, attachments: Vec::new(), schema: None, max_tokens: DEFAULT_MAX_TOKENS, meta: RequestMeta::default() }
    }

    pub fn with_meta(mut self, role_label: impl Into<String>, step: usize) -> Self {
        self.meta = RequestMeta { role_label: Some(role_label.into()), step: Some(step) };
        self
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.messages.is_empty() {
            return Err(ProviderError::InvalidRequest("request has no messages".into()));
        }
        if self.max_tokens == 0 {
            return Err(ProviderError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// All message contents joined, for substring matching.
    pub fn prompt_text(&self) -> String {
        let mut out = String::new();
        for (i, m) in self.messages.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push_str(&m.content);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ProviderError {
    #[error("provider error: {0}")]
    Backend(String),
    #[error("scripted fixture exhausted: {0}")]
    FixtureExhausted(String),
    #[error("schema violation at `{path}`: {reason}")]
    SchemaViolation { path: String, reason: String },
    #[error("provider does not accept {0} input")]
    UnsupportedMedia(MediaKind),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl ProviderError {
    pub fn code(&self) -> &'static str {
        match self {
            ProviderError::Backend(_) => "ProviderError",
            ProviderError::FixtureExhausted(_) => "FixtureExhausted",
            ProviderError::SchemaViolation { .. } => "SchemaViolation",
            ProviderError::UnsupportedMedia(_) => "UnsupportedMedia",
            ProviderError::InvalidRequest(_) => "InvalidRequest",
        }
    }
}

/// A text completion backend.
pub trait Provider {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError>;

    /// Whether attachments of this kind can be sent. Text-only by default.
    fn supports(&self, _kind: MediaKind) -> bool {
        false
    }
}

impl<P: Provider + ?Sized> Provider for &P {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(req)
    }
    fn supports(&self, kind: MediaKind) -> bool {
        (**self).supports(kind)
    }
}

impl<P: Provider + ?Sized> Provider for alloc::boxed::Box<P> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(req)
    }
    fn supports(&self, kind: MediaKind) -> bool {
        (**self).supports(kind)
    }
}

impl<P: Provider + ?Sized> Provider for alloc::sync::Arc<P> {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        (**self).complete(req)
    }
    fn supports(&self, kind: MediaKind) -> bool {
        (**self).supports(kind)
    }
}

/// Text appended to the system message when a JSON object is required.
pub fn json_instruction(schema: &Schema) -> String {
    let mut s = String::from(
        "Respond with exactly one JSON object and nothing else. Do not wrap it in prose. \
         The object must have these fields:",
    );
    for f in &schema.fields {
        s.push_str("\n- ");
        s.push_str(&f.name);
        s.push_str(": ");
        s.push_str(f.kind.describe());
        if !f.required {
            s.push_str(" (optional)");
        }
    }
    s
}

/// Ask for a JSON object matching `schema` and validate it locally.
///
/// The backend's output is never trusted: anything but exactly one object whose
/// fields match the schema is a [`ProviderError::SchemaViolation`].
pub fn complete_structured(provider: &dyn Provider, req: &CompletionRequest, schema: &Schema) -> Result<Map<String, Value>, ProviderError> {
    let mut req = req.clone();
    let instruction = json_instruction(schema);
    match req.messages.iter_mut().find(|m| m.role == Role::System) {
        Some(sys) => {
            sys.content.push_str("\n\n");
            sys.content.push_str(&instruction);
        }
        None => req.messages.insert(0, Message::system(instruction)),
    }
    req.schema = Some(schema.clone());
    req.validate()?;
    let raw = provider.complete(&req)?;
    let record =
        jsonscan::parse_json_object(&raw).map_err(|e| ProviderError::SchemaViolation { path: "$".into(), reason: e.to_string() })?;
    schema.validate(&record)?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::cell::RefCell;

    struct Canned(RefCell<Vec<CompletionRequest>>, &'static str);

    impl Provider for Canned {
        fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
            self.0.borrow_mut().push(req.clone());
            Ok(self.1.into())
        }
    }

    fn scrape_schema() -> Schema {
        Schema::new("scrape").field("summary", FieldKind::Text).field("key_points", FieldKind::TextList)
    }

    fn req() -> CompletionRequest {
        CompletionRequest::new(vec![Message::system("extract"), Message::user("page")])
    }

    #[test]
    fn structured_accepts_fallback_shape() {
        let p = Canned(RefCell::new(Vec::new()), r#"{"summary":"s","key_points":["k"]}"#);
        let rec = complete_structured(&p, &req(), &scrape_schema()).unwrap();
        assert_eq!(rec["key_points"][0], "k");
        let sent = &p.0.borrow()[0];
        assert!(sent.messages[0].content.contains("exactly one JSON object"));
        assert!(sent.schema.is_some());
    }

    #[test]
    fn structured_missing_field() {
        let p = Canned(RefCell::new(Vec::new()), r#"{"summary":"s"}"#);
        let err = complete_structured(&p, &req(), &scrape_schema()).unwrap_err();
        assert_eq!(err, ProviderError::SchemaViolation { path: "key_points".into(), reason: "missing required field".into() });
    }

    #[test]
    fn structured_kind_mismatch() {
        let p = Canned(RefCell::new(Vec::new()), r#"{"summary":"s","key_points":"k"}"#);
        match complete_structured(&p, &req(), &scrape_schema()).unwrap_err() {
            ProviderError::SchemaViolation { path, .. } => assert_eq!(path, "key_points"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn structured_rejects_prose_only() {
        let p = Canned(RefCell::new(Vec::new()), "I could not read the page");
        assert_eq!(complete_structured(&p, &req(), &scrape_schema()).unwrap_err().code(), "SchemaViolation");
    }

    #[test]
    fn media_item_kind_must_match_type() {
        assert!(MediaItem::new(MediaKind::Image, vec![1], "image/png").is_ok());
        assert!(MediaItem::new(MediaKind::Image, vec![1], "audio/wav").is_err());
        assert!(MediaItem::new(MediaKind::Audio, vec![], "audio/wav").is_err());
        assert_eq!(MediaItem::from_media_type(vec![1], "video/mp4").unwrap().kind(), MediaKind::Video);
    }

    #[test]
    fn empty_request_is_invalid() {
        assert!(CompletionRequest::new(Vec::new()).validate().is_err());
    }
}
