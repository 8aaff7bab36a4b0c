//! `caremesh.toml` plus `CAREMESH_*` environment overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CONFIG_FILE: &str = "caremesh.toml";
pub const DEFAULT_WORKERS: usize = 4;
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Scripted,
    Live,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub provider: ProviderKind,
    /// Fixture file for the scripted provider.
    pub fixture: Option<PathBuf>,
    pub workers: usize,
    pub bind: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Stub crawl pages; the HTTP crawl client is used when unset.
    pub crawl_fixtures: Option<PathBuf>,
    /// Stub search snippets; the HTTP search client is used when unset.
    pub search_fixtures: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            provider: ProviderKind::Scripted,
            fixture: None,
            workers: DEFAULT_WORKERS,
            bind: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            data_dir: PathBuf::from("data"),
            crawl_fixtures: None,
            search_fixtures: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value for {var}: `{value}`")]
    Env { var: String, value: String },
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path`, or `caremesh.toml` in the working directory when it
    /// exists, then applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let default = Path::new(DEFAULT_CONFIG_FILE);
        let file = match path {
            Some(p) => Some(p),
            None if default.exists() => Some(default),
            None => None,
        };
        let mut cfg = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.display().to_string(), source })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn bad(var: &str, value: &str) -> ConfigError {
            ConfigError::Env { var: var.into(), value: value.into() }
        }
        if let Some(v) = get("CAREMESH_PROVIDER") {
            self.provider = match v.as_str() {
                "scripted" => ProviderKind::Scripted,
                "live" => ProviderKind::Live,
                _ => return Err(bad("CAREMESH_PROVIDER", &v)),
            };
        }
        if let Some(v) = get("CAREMESH_FIXTURE") {
            self.fixture = Some(v.into());
        }
        if let Some(v) = get("CAREMESH_WORKERS") {
            self.workers = v.parse().ok().filter(|n| *n > 0).ok_or_else(|| bad("CAREMESH_WORKERS", &v))?;
        }
        if let Some(v) = get("CAREMESH_BIND") {
            self.bind = v;
        }
        if let Some(v) = get("CAREMESH_PORT") {
            self.port = v.parse().map_err(|_| bad("CAREMESH_PORT", &v))?;
        }
        if let Some(v) = get("CAREMESH_DATA_DIR") {
            self.data_dir = v.into();
        }
        if let Some(v) = get("CAREMESH_CRAWL_FIXTURES") {
            self.crawl_fixtures = Some(v.into());
        }
        if let Some(v) = get("CAREMESH_SEARCH_FIXTURES") {
            self.search_fixtures = Some(v.into());
        }
        Ok(())
    }
}
