//! Web access: HTML stripping, the two-tier structured scraper, crawl and
//! search client interfaces, and their kernel tool adapters.

mod crawl;
mod html;
mod scrape;
mod url;

pub use crawl::{
    crawl, topic_slug, CrawlClient, CrawlResult, CrawlTool, CrawledPage, SearchClient, SearchHit, SearchTool, MAX_CRAWL_DEPTH,
};
pub use html::html_to_text;
pub use scrape::{
    fallback_prompt, scrape_schema, scrape_structured, PrimaryExtractor, ProviderExtractor, ScrapeMethod, ScrapeResult, FALLBACK_TEXT_LIMIT,
};
pub use url::{domain_allowed, host_of, validate_url};

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Page {
    pub url: String,
    pub status: u16,
    pub media_type: String,
    pub body: Vec<u8>,
}

impl Page {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }

    /// Body as readable text, stripping markup when the page is HTML.
    pub fn text(&self) -> String {
        let raw = String::from_utf8_lossy(&self.body);
        if self.media_type.to_ascii_lowercase().contains("html") {
            html_to_text(&raw)
        } else {
            raw.into_owned()
        }
    }
}

pub trait PageFetcher {
    fn fetch(&self, url: &str) -> Result<Page, WebError>;
}

impl<F: PageFetcher + ?Sized> PageFetcher for &F {
    fn fetch(&self, url: &str) -> Result<Page, WebError> {
        (**self).fetch(url)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WebError {
    #[error("invalid url `{0}`")]
    InvalidUrl(String),
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("primary extractor failed: {0}")]
    PrimaryExtractorError(String),
    #[error("scrape failed; primary: {primary}; fallback: {fallback}")]
    ScrapeFailed { primary: String, fallback: String },
    #[error("schema is not a superset of the scrape schema")]
    InvalidSchema,
    #[error("tool `{tool}` unavailable: {message}")]
    ToolUnavailable { tool: String, message: String },
    #[error("crawl depth {0} outside 1..=3")]
    InvalidDepth(u32),
    #[error("crawl returned no pages")]
    EmptyCrawl,
}

impl WebError {
    pub fn code(&self) -> &'static str {
        match self {
            WebError::InvalidUrl(_) => "InvalidUrl",
            WebError::NetworkError(_) => "NetworkError",
            WebError::PrimaryExtractorError(_) => "PrimaryExtractorError",
            WebError::ScrapeFailed { .. } => "ScrapeFailed",
            WebError::InvalidSchema => "InvalidSchema",
            WebError::ToolUnavailable { .. } => "ToolUnavailable",
            WebError::InvalidDepth(_) => "InvalidDepth",
            WebError::EmptyCrawl => "EmptyCrawl",
        }
    }
}
