//! OpenAI-compatible chat-completions adapter.

use std::time::Duration;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use caremesh_core::provider::{CompletionRequest, MediaKind, Provider, ProviderError, Role};
use serde_json::{json, Value};

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4o-mini";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiveSettings {
    pub api_key: String,
    pub base_url: String,
    pub model: String,
    pub retries: u32,
    pub modalities: Vec<MediaKind>,
}

impl LiveSettings {
    /// Reads `PROVIDER_API_KEY`, `PROVIDER_BASE_URL`, `PROVIDER_MODEL` and
    /// `PROVIDER_MODALITIES` (comma list, default `image`).
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ProviderError> {
        let api_key = get("PROVIDER_API_KEY")
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| ProviderError::Backend("PROVIDER_API_KEY is not set".into()))?;
        let modalities = get("PROVIDER_MODALITIES")
            .unwrap_or_else(|| "image".into())
            .split(',')
            .filter_map(|m| match m.trim() {
                "image" => Some(MediaKind::Image),
                "audio" => Some(MediaKind::Audio),
                "video" => Some(MediaKind::Video),
                _ => None,
            })
            .collect();
        Ok(Self {
            api_key,
            base_url: get("PROVIDER_BASE_URL").unwrap_or_else(|| DEFAULT_BASE_URL.into()),
            model: get("PROVIDER_MODEL").unwrap_or_else(|| DEFAULT_MODEL.into()),
            retries: 1,
            modalities,
        })
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }
}

pub struct LiveProvider {
    settings: LiveSettings,
    client: reqwest::blocking::Client,
}

impl LiveProvider {
    pub fn new(settings: LiveSettings) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| ProviderError::Backend(e.to_string()))?;
        Ok(Self { settings, client })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.settings.base_url.trim_end_matches('/'))
    }

    fn send(&self, body: &Value) -> Result<String, Retry> {
        let resp = self
            .client
            .post(self.endpoint())
            .bearer_auth(&self.settings.api_key)
            .json(body)
            .send()
            .map_err(|e| Retry::Yes(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| Retry::Yes(e.to_string()))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Retry::Yes(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(Retry::No(format!("HTTP {status}: {text}")));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| Retry::No(format!("bad response body: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Retry::No("response has no message content".into()))
    }
}

enum Retry {
    Yes(String),
    No(String),
}

fn role_name(role: Role) -> &'static str {
    match role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    }
}

fn attachment_part(item: &caremesh_core::provider::MediaItem) -> Value {
    let data = B64.encode(item.bytes());
    match item.kind() {
        MediaKind::Image => json!({
            "type": "image_url",
            "image_url": {"url": format!("data:{};base64,{data}", item.media_type())}
        }),
        MediaKind::Audio => {
            let format = item.media_type().rsplit('/').next().unwrap_or("wav");
            json!({"type": "input_audio", "input_audio": {"data": data, "format": format}})
        }
        MediaKind::Video => json!({
            "type": "file",
            "file": {"file_data": format!("data:{};base64,{data}", item.media_type())}
        }),
    }
}

/// Chat-completions body. Attachments ride on the last user message.
pub fn request_body(model: &str, req: &CompletionRequest) -> Value {
    let last_user = req.messages.iter().rposition(|m| m.role == Role::User);
    let messages: Vec<Value> = req
        .messages
        .iter()
        .enumerate()
        .map(|(i, m)| {
            if Some(i) == last_user && !req.attachments.is_empty() {
                let mut parts = vec![json!({"type": "text", "text": m.content})];
                parts.extend(req.attachments.iter().map(attachment_part));
                json!({"role": role_name(m.role), "content": parts})
            } else {
                json!({"role": role_name(m.role), "content": m.content})
            }
        })
        .collect();
    json!({"model": model, "max_tokens": req.max_tokens, "messages": messages})
}

impl Provider for LiveProvider {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        req.validate()?;
        if let Some(a) = req.attachments.iter().find(|a| !self.supports(a.kind())) {
            return Err(ProviderError::UnsupportedMedia(a.kind()));
        }
        let body = request_body(&self.settings.model, req);
        let mut attempt = 0;
        loop {
            match self.send(&body) {
                Ok(text) => return Ok(text),
                Err(Retry::Yes(msg)) if attempt < self.settings.retries => {
                    tracing::warn!(attempt, %msg, "retrying provider call");
                    attempt += 1;
                }
                Err(Retry::Yes(msg)) | Err(Retry::No(msg)) => return Err(ProviderError::Backend(msg)),
            }
        }
    }

    fn supports(&self, kind: MediaKind) -> bool {
        self.settings.modalities.contains(&kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use caremesh_core::provider::{MediaItem, Message};
    use std::collections::HashMap;

    #[test]
    fn settings_require_key() {
        assert!(LiveSettings::from_lookup(|_| None).is_err());
        let env: HashMap<&str, &str> = [("PROVIDER_API_KEY", "k"), ("PROVIDER_MODALITIES", "image, audio")].into();
        let s = LiveSettings::from_lookup(|k| env.get(k).map(|v| v.to_string())).unwrap();
        assert_eq!(s.model, DEFAULT_MODEL);
        assert_eq!(s.modalities, vec![MediaKind::Image, MediaKind::Audio]);
    }

    #[test]
    fn attachments_go_on_last_user_message() {
        let mut req = CompletionRequest::new(vec![Message::system("s"), Message::user("u")]);
        req.attachments.push(MediaItem::from_media_type(vec![1, 2], "image/png").unwrap());
        let body = request_body("m", &req);
        assert_eq!(body["messages"][0]["content"], "s");
        let parts = body["messages"][1]["content"].as_array().unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[1]["image_url"]["url"], "data:image/png;base64,AQI=");
    }

    #[test]
    fn unsupported_attachment_is_refused_before_sending() {
        let settings =
            LiveSettings { api_key: "k".into(), base_url: "http://127.0.0.1:9".into(), model: "m".into(), retries: 0, modalities: vec![] };
        let p = LiveProvider::new(settings).unwrap();
        let mut req = CompletionRequest::new(vec![Message::user("u")]);
        req.attachments.push(MediaItem::from_media_type(vec![1], "video/mp4").unwrap());
        assert_eq!(p.complete(&req), Err(ProviderError::UnsupportedMedia(MediaKind::Video)));
    }
}
