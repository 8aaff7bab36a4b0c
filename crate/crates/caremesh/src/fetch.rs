//! Blocking HTTP page fetcher.

use std::time::Duration;

use caremesh_core::web::{Page, PageFetcher, WebError};
use reqwest::blocking::Client;
use reqwest::redirect::Policy;
use url::Url;

pub const MAX_REDIRECTS: usize = 5;

pub struct HttpFetcher {
    client: Client,
}

impl HttpFetcher {
    pub fn new() -> Result<Self, WebError> {
        let client = Client::builder()
            .redirect(Policy::limited(MAX_REDIRECTS))
            .timeout(Duration::from_secs(30))
            .user_agent(concat!("caremesh/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| WebError::NetworkError(e.to_string()))?;
        Ok(Self { client })
    }
}

/// Parses and checks an absolute http(s) URL.
pub fn parse_http_url(raw: &str) -> Result<Url, WebError> {
    let url = Url::parse(raw.trim()).map_err(|_| WebError::InvalidUrl(raw.into()))?;
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none_or(str::is_empty) {
        return Err(WebError::InvalidUrl(raw.into()));
    }
    Ok(url)
}

impl PageFetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<Page, WebError> {
        let url = parse_http_url(url)?;
        let resp = self.client.get(url).send().map_err(|e| WebError::NetworkError(e.to_string()))?;
        let final_url = resp.url().to_string();
        let status = resp.status().as_u16();
        let media_type = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("application/octet-stream")
            .to_string();
        let body = resp.bytes().map_err(|e| WebError::NetworkError(e.to_string()))?.to_vec();
        Ok(Page { url: final_url, status, media_type, body })
    }
}
