use alloc::string::{String, ToString};

use super::WebError;

/// Lowercased host of an http(s) URL.
pub fn host_of(url: &str) -> Option<String> {
    let rest = url.strip_prefix("https://").or_else(|| url.strip_prefix("http://"))?;
    let authority = rest.split(['/', '?', '#']).next()?;
    let hostport = authority.rsplit('@').next()?;
    let host = match hostport.strip_prefix('[') {
        Some(v6) => v6.split(']').next()?,
        None => hostport.split(':').next()?,
    };
    if host.is_empty() {
        return None;
    }
    Some(host.to_ascii_lowercase())
}

/// Syntactic check only: scheme http or https, a host, no whitespace.
pub fn validate_url(url: &str) -> Result<(), WebError> {
    let lower = url.trim().to_ascii_lowercase();
    let ok = !url.chars().any(char::is_whitespace)
        && host_of(&lower).is_some_and(|h| h.chars().all(|c| c.is_ascii_alphanumeric() || "-.:".contains(c)));
    if ok {
        Ok(())
    } else {
        Err(WebError::InvalidUrl(url.to_string()))
    }
}

/// True when `host` equals an allowed domain or is a subdomain of one.
pub fn domain_allowed(host: &str, allow: &[&str]) -> bool {
    let host = host.trim_end_matches('.').to_ascii_lowercase();
    allow.iter().any(|d| {
        let d = d.to_ascii_lowercase();
        host == d || host.strip_suffix(d.as_str()).is_some_and(|p| p.ends_with('.'))
    })
}
