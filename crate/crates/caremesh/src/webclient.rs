//! Crawl and search clients: fixture-directory stubs and thin HTTP adapters.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use caremesh_core::web::{domain_allowed, host_of, topic_slug, CrawlClient, CrawledPage, SearchClient, SearchHit, WebError};
use serde::Deserialize;
use serde_json::json;

const CRAWL_TIMEOUT: Duration = Duration::from_secs(300);
const SEARCH_TIMEOUT: Duration = Duration::from_secs(30);

fn unavailable(tool: &str, message: impl Into<String>) -> WebError {
    WebError::ToolUnavailable { tool: tool.into(), message: message.into() }
}

/// A blocking client built per call, so the owning value can live inside an
/// async runtime without holding one.
fn http_client(tool: &str, timeout: Duration) -> Result<reqwest::blocking::Client, WebError> {
    reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| unavailable(tool, e.to_string()))
}

/// `.txt` files of a directory, sorted by name.
fn text_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "txt"))
        .collect();
    files.sort();
    Ok(files)
}

/// Serves `<root>/<topic-slug>/*.txt`; the first line of each file is the page URL.
#[derive(Clone, Debug)]
pub struct StubCrawlClient {
    root: PathBuf,
}

impl StubCrawlClient {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
}

impl CrawlClient for StubCrawlClient {
    fn crawl(&self, target: &str, _depth: u32) -> Result<Vec<CrawledPage>, WebError> {
        let dir = self.root.join(topic_slug(target));
        let files = text_files(&dir).map_err(|e| unavailable("crawl", format!("{}: {e}", dir.display())))?;
        files
            .iter()
            .map(|path| {
                let raw = fs::read_to_string(path).map_err(|e| unavailable("crawl", format!("{}: {e}", path.display())))?;
                let (url, text) = raw.split_once('\n').unwrap_or((raw.as_str(), ""));
                Ok(CrawledPage { url: url.trim().to_string(), text: text.trim().to_string() })
            })
            .collect()
    }
}

#[derive(Deserialize)]
struct CrawlResponse {
    pages: Vec<CrawledPage>,
}

/// Posts `{target, depth}` to a crawl service and expects `{pages: [{url, text}]}`.
pub struct HttpCrawlClient {
    endpoint: Option<String>,
    api_key: Option<String>,
}

impl HttpCrawlClient {
    pub fn new(endpoint: Option<String>, api_key: Option<String>) -> Self {
        Self { endpoint, api_key }
    }

    /// `CRAWL_API_URL` and `CRAWL_API_KEY`. Unset means every call fails as unavailable.
    pub fn from_env() -> Self {
        Self::new(std::env::var("CRAWL_API_URL").ok(), std::env::var("CRAWL_API_KEY").ok())
    }
}

impl CrawlClient for HttpCrawlClient {
    fn crawl(&self, target: &str, depth: u32) -> Result<Vec<CrawledPage>, WebError> {
        let endpoint = self.endpoint.as_deref().ok_or_else(|| unavailable("crawl", "CRAWL_API_URL is not set"))?;
        let mut req = http_client("crawl", CRAWL_TIMEOUT)?.post(endpoint).json(&json!({"target": target, "depth": depth}));
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| unavailable("crawl", e.to_string()))?;
        if !resp.status().is_success() {
            return Err(unavailable("crawl", format!("HTTP {}", resp.status())));
        }
        resp.json::<CrawlResponse>().map(|r| r.pages).map_err(|e| unavailable("crawl", e.to_string()))
    }
}

/// Splits a query into lowercase terms and `site:` domains.
pub fn split_query(query: &str) -> (Vec<String>, Vec<String>) {
    let mut terms = Vec::new();
    let mut sites = Vec::new();
    for word in query.split_whitespace() {
        match word.strip_prefix("site:") {
            Some(d) if !d.is_empty() => sites.push(d.to_ascii_lowercase()),
            _ => {
                let t: String = word.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
                if !t.is_empty() && !matches!(t.as_str(), "or" | "and") {
                    terms.push(t);
                }
            }
        }
    }
    (terms, sites)
}

/// Snippet files under one directory: line 1 URL, line 2 title, rest snippet.
/// A hit must sit on a `site:` domain when the query names any, and share at
/// least one term with the query.
#[derive(Clone, Debug)]
pub struct FixtureSearch {
    root: PathBuf,
}

impl FixtureSearch {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn load(&self) -> Result<Vec<SearchHit>, WebError> {
        let files = text_files(&self.root).map_err(|e| unavailable("search", format!("{}: {e}", self.root.display())))?;
        files
            .iter()
            .map(|p| {
                let raw = fs::read_to_string(p).map_err(|e| unavailable("search", e.to_string()))?;
                let mut lines = raw.splitn(3, '\n');
                let url = lines.next().unwrap_or_default().trim().to_string();
                let title = lines.next().unwrap_or_default().trim().to_string();
                let snippet = lines.next().unwrap_or_default().trim().to_string();
                Ok(SearchHit { title, url, snippet })
            })
            .collect()
    }
}

impl SearchClient for FixtureSearch {
    fn search(&self, query: &str, max_results: usize) -> Result<Vec<SearchHit>, WebError> {
        let (terms, sites) = split_query(query);
        let site_refs: Vec<&str> = sites.iter().map(String::as_str).collect();
        let mut scored: Vec<(usize, SearchHit)> = self
            .load()?
            .into_iter()
            .filter(|h| site_refs.is_empty() || host_of(&h.url).is_some_and(|host| domain_allowed(&host, &site_refs)))
            .filter_map(|h| {
                let hay = format!("{} {}", h.title, h.snippet).to_lowercase();
                let score = terms.iter().filter(|t| hay.contains(t.as_str())).count();
                (score > 0).then_some((score, h))
            })
            .collect();
        scored.sort_by_key(|s| std::cmp::Reverse(s.0));
        Ok(scored.into_iter().take(max_results).map(|(_, h)| h).collect())
    }
}

#[derive(Deserialize)]
struct SearchResponse {
    results: Vec<SearchHit>,
}

/// GETs `<endpoint>?q=<query>&n=<max>` and expects `{results: [{title, url, snippet}]}`.
pub struct HttpSearchClient {
    endpoint: Option<String>,
    api_key: Option<String>,
}

impl HttpSearchClient {
    pub fn new(endpoint: Option<String>, api_key: Option<String>) -> Self {
        Self { endpoint, api_key }
    }

    /// `SEARCH_API_URL` and `SEARCH_API_KEY`.
    pub fn from_env() -> Self {
        Self::new(std::env::var("SEARCH_API_URL").ok(), std::env::var("SEARCH_API_KEY").ok())
    }
}

impl SearchClient for HttpSearchClient {
    fn search(&self, query: &str, max_results: usize) -> Result<Vec<SearchHit>, WebError> {
        let endpoint = self.endpoint.as_deref().ok_or_else(|| unavailable("search", "SEARCH_API_URL is not set"))?;
        let mut req =
            http_client("search", SEARCH_TIMEOUT)?.get(endpoint).query(&[("q", query.to_string()), ("n", max_results.to_string())]);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| unavailable("search", e.to_string()))?;
        if !resp.status().is_success() {
            return Err(unavailable("search", format!("HTTP {}", resp.status())));
        }
        let mut hits = resp.json::<SearchResponse>().map_err(|e| unavailable("search", e.to_string()))?.results;
        hits.truncate(max_results);
        Ok(hits)
    }
}
