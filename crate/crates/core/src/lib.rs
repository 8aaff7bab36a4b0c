//! Allocation-only building blocks for the caremesh agent platform.
//!
//! Everything here is pure: agents talk to models through the [`provider::Provider`]
//! trait and to the outside world through [`kernel::Tool`] implementations, so the
//! same pipelines run against a scripted fixture in tests and a live backend in
//! production. IO, HTTP and file formats live in the `caremesh` crate.

#![no_std]

extern crate alloc;

pub mod analyst;
pub mod content;
pub mod digest;
pub mod jsonscan;
pub mod kernel;
pub mod markdown;
pub mod provider;
pub mod rag;
pub mod sql;
pub mod web;
pub mod workflows;

#[cfg(test)]
mod testutil;

pub use content::Content;
