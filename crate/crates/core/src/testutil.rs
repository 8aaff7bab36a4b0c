//! Scripted providers for unit tests.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cell::RefCell;

use crate::provider::{CompletionRequest, MediaKind, Provider, ProviderError};

/// Replies by request role label. Each label may hold a queue of replies.
#[derive(Default)]
pub struct ByRole {
    replies: RefCell<BTreeMap<String, Vec<String>>>,
    pub log: RefCell<Vec<CompletionRequest>>,
    pub media: Vec<MediaKind>,
}

impl ByRole {
    pub fn new(pairs: &[(&str, &str)]) -> Self {
        let s = Self::default();
        for (role, reply) in pairs {
            s.replies.borrow_mut().entry(role.to_string()).or_default().insert(0, reply.to_string());
        }
        s
    }

    pub fn with_media(mut self, kinds: &[MediaKind]) -> Self {
        self.media = kinds.to_vec();
        self
    }

    pub fn calls(&self) -> usize {
        self.log.borrow().len()
    }
}

impl Provider for ByRole {
    fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
        self.log.borrow_mut().push(req.clone());
        let role = req.meta.role_label.clone().unwrap_or_default();
        self.replies.borrow_mut().get_mut(&role).and_then(Vec::pop).ok_or(ProviderError::FixtureExhausted(role))
    }

    fn supports(&self, kind: MediaKind) -> bool {
        self.media.contains(&kind)
    }
}
