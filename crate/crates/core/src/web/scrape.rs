use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{validate_url, PageFetcher, WebError};
use crate::provider::{complete_structured, CompletionRequest, FieldKind, Message, Provider, Schema};

/// Upper bound, in chars, on the user message sent by the fallback tier.
pub const FALLBACK_TEXT_LIMIT: usize = 8000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScrapeMethod {
    Primary,
    Fallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScrapeResult {
    pub summary: String,
    pub key_points: Vec<String>,
    pub method: ScrapeMethod,
    pub url: String,
    /// Fields requested by a superset schema beyond summary and key points.
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub extra: Map<String, Value>,
}

pub fn scrape_schema() -> Schema {
    Schema::new("page_summary").field("summary", FieldKind::Text).field("key_points", FieldKind::TextList)
}

/// First-tier extractor. Any error it returns sends the scrape to the fallback.
pub trait PrimaryExtractor {
    fn extract(&self, url: &str, prompt: &str, schema: &Schema) -> Result<Map<String, Value>, WebError>;
}

/// Provider-backed primary tier: full page text, no truncation.
pub struct ProviderExtractor<'a> {
    pub fetcher: &'a dyn PageFetcher,
    pub provider: &'a dyn Provider,
}

const PRIMARY_SYSTEM: &str = "You read web pages and extract structured information for a caregiving research assistant.";
const FALLBACK_SYSTEM: &str = "You are given the raw text of a web page. Extract only what the page states.";

impl PrimaryExtractor for ProviderExtractor<'_> {
    fn extract(&self, url: &str, prompt: &str, schema: &Schema) -> Result<Map<String, Value>, WebError> {
        let fail = |m: String| WebError::PrimaryExtractorError(m);
        let page = self.fetcher.fetch(url).map_err(|e| fail(e.to_string()))?;
        if !page.is_success() {
            return Err(fail(format!("HTTP status {}", page.status)));
        }
        let user = format!("Task: {prompt}\nURL: {url}\n\nPage content:\n{}", page.text());
        let req = CompletionRequest::new(alloc::vec![Message::system(PRIMARY_SYSTEM), Message::user(user)]).with_meta("scrape-primary", 0);
        complete_structured(self.provider, &req, schema).map_err(|e| fail(e.to_string()))
    }
}

/// The fallback user message, cut to [`FALLBACK_TEXT_LIMIT`] chars.
pub fn fallback_prompt(prompt: &str, url: &str, page_text: &str) -> String {
    let full = format!("Task: {prompt}\nURL: {url}\n\nPage text:\n{page_text}");
    full.chars().take(FALLBACK_TEXT_LIMIT).collect()
}

fn to_result(mut record: Map<String, Value>, url: &str, method: ScrapeMethod) -> Result<ScrapeResult, String> {
    let summary = match record.remove("summary") {
        Some(Value::String(s)) if !s.trim().is_empty() => s,
        _ => return Err("summary is empty or missing".into()),
    };
    let key_points: Vec<String> = match record.remove("key_points") {
        Some(Value::Array(items)) => items.into_iter().filter_map(|v| v.as_str().map(String::from)).collect(),
        _ => Vec::new(),
    };
    if key_points.is_empty() {
        return Err("key_points is empty".into());
    }
    Ok(ScrapeResult { summary, key_points, method, url: url.to_string(), extra: record })
}

fn fallback(url: &str, prompt: &str, schema: &Schema, fetcher: &dyn PageFetcher, provider: &dyn Provider) -> Result<ScrapeResult, String> {
    let page = fetcher.fetch(url).map_err(|e| e.to_string())?;
    if !page.is_success() {
        return Err(format!("HTTP status {}", page.status));
    }
    let user = fallback_prompt(prompt, url, &page.text());
    let req = CompletionRequest::new(alloc::vec![Message::system(FALLBACK_SYSTEM), Message::user(user)]).with_meta("scrape-fallback", 0);
    let record = complete_structured(provider, &req, schema).map_err(|e| e.to_string())?;
    to_result(record, url, ScrapeMethod::Fallback)
}

/// Structured page summary. The primary tier runs first; any failure there
/// (including an unusable record) hands over to the strict-JSON fallback.
pub fn scrape_structured(
    url: &str,
    prompt: &str,
    schema: &Schema,
    primary: &dyn PrimaryExtractor,
    fetcher: &dyn PageFetcher,
    provider: &dyn Provider,
) -> Result<ScrapeResult, WebError> {
    validate_url(url)?;
    if !schema.is_superset_of(&scrape_schema()) {
        return Err(WebError::InvalidSchema);
    }
    let primary_cause = match primary.extract(url, prompt, schema) {
        Ok(record) => match schema.validate(&record).map_err(|e| e.to_string()).and_then(|_| to_result(record, url, ScrapeMethod::Primary))
        {
            Ok(r) => return Ok(r),
            Err(e) => e,
        },
        Err(e) => e.to_string(),
    };
    fallback(url, prompt, schema, fetcher, provider).map_err(|fallback| WebError::ScrapeFailed { primary: primary_cause, fallback })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::ProviderError;
    use crate::web::Page;
    use alloc::vec;
    use core::cell::{Cell, RefCell};
    use proptest::prelude::*;

    struct FailingPrimary;
    impl PrimaryExtractor for FailingPrimary {
        fn extract(&self, _: &str, _: &str, _: &Schema) -> Result<Map<String, Value>, WebError> {
            Err(WebError::PrimaryExtractorError("module not found: playwright".into()))
        }
    }

    struct GoodPrimary;
    impl PrimaryExtractor for GoodPrimary {
        fn extract(&self, _: &str, _: &str, _: &Schema) -> Result<Map<String, Value>, WebError> {
            Ok(serde_json::from_str(r#"{"summary":"s","key_points":["k"]}"#).unwrap())
        }
    }

    struct Fetch {
        count: Cell<usize>,
        status: u16,
        body: String,
    }
    impl Fetch {
        fn ok(body: &str) -> Self {
            Fetch { count: Cell::new(0), status: 200, body: body.into() }
        }
    }
    impl PageFetcher for Fetch {
        fn fetch(&self, url: &str) -> Result<Page, WebError> {
            self.count.set(self.count.get() + 1);
            Ok(Page { url: url.into(), status: self.status, media_type: "text/html".into(), body: self.body.clone().into_bytes() })
        }
    }

    struct Reply(String, RefCell<Vec<CompletionRequest>>);
    impl Provider for Reply {
        fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
            self.1.borrow_mut().push(req.clone());
            Ok(self.0.clone())
        }
    }
    fn reply(s: &str) -> Reply {
        Reply(s.into(), RefCell::new(vec![]))
    }

    const URL: &str = "https://www.alz.org/help-support/caregiving";

    #[test]
    fn fallback_after_primary_failure() {
        let f = Fetch::ok("<h1>Caregiving</h1><p>Tips for daily care.</p>");
        let p = reply("Here you go:\n{\"summary\":\"Daily care tips\",\"key_points\":[\"routine\",\"safety\"]}\nThanks");
        let r = scrape_structured(URL, "Summarize", &scrape_schema(), &FailingPrimary, &f, &p).unwrap();
        assert_eq!(r.method, ScrapeMethod::Fallback);
        assert_eq!(r.key_points, ["routine", "safety"]);
        assert_eq!(f.count.get(), 1);
        let req = &p.1.borrow()[0];
        assert!(req.prompt_text().contains("Tips for daily care."));
        assert!(req.prompt_text().contains("JSON"));
    }

    #[test]
    fn primary_short_circuits() {
        let f = Fetch::ok("x");
        let p = reply("unused");
        let r = scrape_structured(URL, "Summarize", &scrape_schema(), &GoodPrimary, &f, &p).unwrap();
        assert_eq!(r.method, ScrapeMethod::Primary);
        assert_eq!(f.count.get(), 0);
        assert!(p.1.borrow().is_empty());
    }

    #[test]
    fn both_fail() {
        let f = Fetch::ok("x");
        let p = reply("{\"summary\":\"a\"} {\"summary\":\"b\"}");
        match scrape_structured(URL, "S", &scrape_schema(), &FailingPrimary, &f, &p) {
            Err(WebError::ScrapeFailed { primary, fallback }) => {
                assert!(primary.contains("playwright"));
                assert!(fallback.contains("2"));
            }
            other => panic!("{other:?}"),
        }
        let f404 = Fetch { count: Cell::new(0), status: 404, body: String::new() };
        let err = scrape_structured(URL, "S", &scrape_schema(), &FailingPrimary, &f404, &reply("{}")).unwrap_err();
        assert_eq!(err.code(), "ScrapeFailed");
    }

    #[test]
    fn provider_primary_and_preconditions() {
        let f = Fetch::ok("<p>page</p>");
        let p = reply(r#"{"summary":"s","key_points":["a"],"audience":"caregivers"}"#);
        let schema = scrape_schema().field("audience", FieldKind::Text);
        let primary = ProviderExtractor { fetcher: &f, provider: &p };
        let r = scrape_structured(URL, "S", &schema, &primary, &f, &p).unwrap();
        assert_eq!(r.method, ScrapeMethod::Primary);
        assert_eq!(r.extra.get("audience"), Some(&Value::String("caregivers".into())));
        assert_eq!(scrape_structured("not a url", "S", &schema, &primary, &f, &p).unwrap_err().code(), "InvalidUrl");
        let narrow = Schema::new("x").field("summary", FieldKind::Text);
        assert_eq!(scrape_structured(URL, "S", &narrow, &primary, &f, &p), Err(WebError::InvalidSchema));
    }

    proptest! {
        #[test]
        fn fallback_prompt_bounded(prompt in ".{0,200}", text in ".{0,12000}") {
            prop_assert!(fallback_prompt(&prompt, URL, &text).chars().count() <= FALLBACK_TEXT_LIMIT);
        }

        #[test]
        fn fallback_completeness(summary in "[a-z ]{0,12}", points in proptest::collection::vec("[a-z]{0,6}", 0..4), wrap in any::<bool>()) {
            let body = serde_json::json!({"summary": summary, "key_points": points}).to_string();
            let text = if wrap { alloc::format!("Result: {body} done") } else { body };
            let f = Fetch::ok("<p>x</p>");
            let out = scrape_structured(URL, "S", &scrape_schema(), &FailingPrimary, &f, &reply(&text));
            let valid = !summary.trim().is_empty() && !points.is_empty();
            match out {
                Ok(r) => prop_assert!(valid && r.method == ScrapeMethod::Fallback),
                Err(WebError::ScrapeFailed { .. }) => prop_assert!(!valid),
                Err(e) => prop_assert!(false, "unexpected {e:?}"),
            }
        }
    }
}
