use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::WebError;
use crate::kernel::{Tool, ToolError};

pub const MAX_CRAWL_DEPTH: u32 = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawledPage {
    pub url: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrawlResult {
    pub topic: String,
    pub pages: Vec<CrawledPage>,
    pub depth: u32,
}

pub trait CrawlClient {
    fn crawl(&self, target: &str, depth: u32) -> Result<Vec<CrawledPage>, WebError>;
}

/// Directory-safe form of a topic: lowercase alphanumeric runs joined by `-`.
pub fn topic_slug(topic: &str) -> String {
    topic.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(|w| w.to_lowercase()).collect::<Vec<_>>().join("-")
}

/// Any client failure is reported as the crawl tool being unavailable.
pub fn crawl(client: &dyn CrawlClient, target: &str, depth: u32) -> Result<CrawlResult, WebError> {
    if !(1..=MAX_CRAWL_DEPTH).contains(&depth) {
        return Err(WebError::InvalidDepth(depth));
    }
    let pages = client.crawl(target, depth).map_err(|e| match e {
        WebError::ToolUnavailable { .. } => e,
        other => WebError::ToolUnavailable { tool: "crawl".into(), message: other.to_string() },
    })?;
    if pages.is_empty() {
        return Err(WebError::EmptyCrawl);
    }
    Ok(CrawlResult { topic: target.to_string(), pages, depth })
}

fn tool_error(e: WebError) -> ToolError {
    match e {
        WebError::InvalidDepth(_) | WebError::InvalidUrl(_) => ToolError::RejectedInput(e.to_string()),
        WebError::ToolUnavailable { message, .. } => ToolError::Unavailable(message),
        other => ToolError::Unavailable(other.to_string()),
    }
}

/// Kernel adapter. Arguments: `{"target": text, "depth": 1..=3}`.
pub struct CrawlTool<'a>(pub &'a dyn CrawlClient);

impl Tool for CrawlTool<'_> {
    fn call(&self, args: &Value) -> Result<Value, ToolError> {
        let target = args
            .get("target")
            .and_then(Value::as_str)
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| ToolError::RejectedInput("`target` must be non-empty text".into()))?;
        let depth =
            args.get("depth").and_then(Value::as_u64).ok_or_else(|| ToolError::RejectedInput("`depth` must be an integer".into()))?;
        let depth = u32::try_from(depth).map_err(|_| tool_error(WebError::InvalidDepth(u32::MAX)))?;
        let result = crawl(self.0, target, depth).map_err(tool_error)?;
        serde_json::to_value(result).map_err(|e| ToolError::Unavailable(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchHit {
    pub title: String,
    pub url: String,
    pub snippet: String,
}

pub trait SearchClient {
    fn search(&self, query: &str, max_results: usize) -> Result<Vec<SearchHit>, WebError>;
}

pub const DEFAULT_SEARCH_RESULTS: u64 = 5;

/// Kernel adapter. Arguments: `{"query": text, "max_results"?: integer}`.
/// An empty hit list is a successful result.
pub struct SearchTool<'a>(pub &'a dyn SearchClient);

impl Tool for SearchTool<'_> {
    fn call(&self, args: &Value) -> Result<Value, ToolError> {
        let query = args
            .get("query")
            .and_then(Value::as_str)
            .filter(|q| !q.trim().is_empty())
            .ok_or_else(|| ToolError::RejectedInput("`query` must be non-empty text".into()))?;
        let max = args.get("max_results").and_then(Value::as_u64).unwrap_or(DEFAULT_SEARCH_RESULTS) as usize;
        let hits = self.0.search(query, max).map_err(|e| match e {
            WebError::InvalidUrl(_) => ToolError::RejectedInput(e.to_string()),
            other => ToolError::Unavailable(format!("search: {other}")),
        })?;
        Ok(json!({ "query": query, "hits": hits }))
    }
}
