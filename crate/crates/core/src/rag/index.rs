use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::RagError;
use crate::provider::cosine;

#[derive(Clone, Debug, PartialEq)]
pub struct IndexEntry {
    pub doc_id: String,
    pub chunk_id: u32,
    pub char_offset: usize,
    pub vector: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredEntry {
    pub doc_id: String,
    pub chunk_id: u32,
    pub score: f64,
}

/// Flat exact-search index. Scores every entry on each query.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
}

fn rank_cmp(a: &ScoredEntry, b: &ScoredEntry) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)).then_with(|| a.chunk_id.cmp(&b.chunk_id))
}

impl VectorIndex {
    pub fn new(dim: usize) -> Self {
        Self { dim, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn add(&mut self, entries: impl IntoIterator<Item = IndexEntry>) -> Result<(), RagError> {
        let entries: Vec<IndexEntry> = entries.into_iter().collect();
        if let Some(bad) = entries.iter().find(|e| e.vector.len() != self.dim) {
            return Err(RagError::DimensionMismatch { expected: self.dim, found: bad.vector.len() });
        }
        self.entries.extend(entries);
        Ok(())
    }

    /// Top `k` entries by cosine similarity, ties by `(doc_id, chunk_id)`.
    /// `k` past the index size returns every entry.
    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<ScoredEntry>, RagError> {
        if self.entries.is_empty() {
            return Err(RagError::EmptyIndex);
        }
        if query.len() != self.dim {
            return Err(RagError::DimensionMismatch { expected: self.dim, found: query.len() });
        }
        let mut scored: Vec<ScoredEntry> = self
            .entries
            .iter()
            .map(|e| ScoredEntry { doc_id: e.doc_id.clone(), chunk_id: e.chunk_id, score: cosine(query, &e.vector) })
            .collect();
        scored.sort_by(rank_cmp);
        scored.truncate(k);
        Ok(scored)
    }
}
