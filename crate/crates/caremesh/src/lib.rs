//! Host runtime for the caremesh agents: providers, storage, HTTP service and CLI.

pub mod cli;
pub mod config;
pub mod csvload;
pub mod fetch;
pub mod live;
pub mod pdf;
pub mod pool;
pub mod runtime;
pub mod scripted;
pub mod service;
pub mod store;
pub mod webclient;
