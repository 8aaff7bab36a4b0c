use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::chunk::{chunk_with, ChunkParams};
use super::index::{IndexEntry, VectorIndex};
use super::RagError;
use crate::provider::Embedder;
use crate::provider::{CompletionRequest, Message, Provider};

pub const DEFAULT_TOP_K: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub doc_id: String,
    pub chunk_id: u32,
    pub text: String,
    pub char_offset: usize,
    pub source_name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Citation {
    pub doc_id: String,
    pub chunk_id: u32,
    pub source_name: String,
    pub score: f64,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundedAnswer {
    pub answer_text: String,
    pub citations: Vec<Citation>,
    pub retrieved_k: usize,
}

/// A finished workflow report that can be fed back into the knowledge base.
pub trait ReportDocument {
    fn title(&self) -> &str;
    fn body(&self) -> &str;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct DocEntry {
    source_name: String,
    chunks: Vec<DocumentChunk>,
}

/// Documents, their chunks and the vector index over those chunks.
#[derive(Clone, Debug)]
pub struct KnowledgeBase {
    params: ChunkParams,
    docs: BTreeMap<String, DocEntry>,
    index: VectorIndex,
}

impl KnowledgeBase {
    pub fn new(dim: usize) -> Self {
        Self::with_params(dim, ChunkParams::default())
    }

    pub fn with_params(dim: usize, params: ChunkParams) -> Self {
        Self { params, docs: BTreeMap::new(), index: VectorIndex::new(dim) }
    }

    /// Rebuilds from persisted parts. Every index entry must resolve to a chunk.
    pub fn from_parts(params: ChunkParams, chunks: Vec<DocumentChunk>, index: VectorIndex) -> Result<Self, RagError> {
        let mut kb = Self::with_params(index.dim(), params);
        for c in chunks {
            kb.docs
                .entry(c.doc_id.clone())
                .or_insert_with(|| DocEntry { source_name: c.source_name.clone(), chunks: Vec::new() })
                .chunks
                .push(c);
        }
        for d in kb.docs.values_mut() {
            d.chunks.sort_by_key(|c| c.chunk_id);
        }
        for e in index.entries() {
            if kb.chunk(&e.doc_id, e.chunk_id).is_none() {
                return Err(RagError::UnknownDocument(format!("{}#{}", e.doc_id, e.chunk_id)));
            }
        }
        kb.index = index;
        Ok(kb)
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    pub fn chunks_of(&self, doc_id: &str) -> Option<&[DocumentChunk]> {
        self.docs.get(doc_id).map(|d| d.chunks.as_slice())
    }

    pub fn chunk(&self, doc_id: &str, chunk_id: u32) -> Option<&DocumentChunk> {
        self.docs.get(doc_id)?.chunks.get(chunk_id as usize).filter(|c| c.chunk_id == chunk_id)
    }

    pub fn chunk_count(&self) -> usize {
        self.index.len()
    }

    fn next_doc_id(&self) -> String {
        let mut n = self.docs.len() + 1;
        loop {
            let id = format!("doc-{n}");
            if !self.docs.contains_key(&id) {
                return id;
            }
            n += 1;
        }
    }

    /// Chunks, embeds and indexes `text`. Returns the new doc id.
    pub fn add_document(&mut self, source_name: &str, text: &str, embedder: &dyn Embedder) -> Result<String, RagError> {
        if text.is_empty() {
            return Err(RagError::InvalidChunkParams("document text is empty".into()));
        }
        if embedder.dim() != self.index.dim() {
            return Err(RagError::DimensionMismatch { expected: self.index.dim(), found: embedder.dim() });
        }
        let doc_id = self.next_doc_id();
        let spans = chunk_with(text, self.params)?;
        let texts: Vec<String> = spans.iter().map(|s| s.text.clone()).collect();
        let vectors = embedder.embed(&texts)?;
        let chunks: Vec<DocumentChunk> = spans
            .into_iter()
            .map(|s| DocumentChunk {
                doc_id: doc_id.clone(),
                chunk_id: s.chunk_id,
                text: s.text,
                char_offset: s.char_offset,
                source_name: source_name.to_string(),
            })
            .collect();
        let entries: Vec<IndexEntry> = chunks
            .iter()
            .zip(vectors)
            .map(|(c, vector)| IndexEntry { doc_id: doc_id.clone(), chunk_id: c.chunk_id, char_offset: c.char_offset, vector })
            .collect();
        self.index.add(entries)?;
        self.docs.insert(doc_id.clone(), DocEntry { source_name: source_name.to_string(), chunks });
        Ok(doc_id)
    }

    /// Indexes a report body under its title. Repeated ingests get new ids.
    pub fn ingest_report(&mut self, report: &dyn ReportDocument, embedder: &dyn Embedder) -> Result<String, RagError> {
        self.add_document(report.title(), report.body(), embedder)
    }

    pub fn retrieve(&self, query: &str, k: usize, embedder: &dyn Embedder) -> Result<Vec<Citation>, RagError> {
        if self.index.is_empty() {
            return Err(RagError::EmptyIndex);
        }
        let q = embedder.embed_one(query)?;
        self.index
            .search(&q, k)?
            .into_iter()
            .map(|hit| {
                let c = self.chunk(&hit.doc_id, hit.chunk_id).ok_or_else(|| RagError::UnknownDocument(hit.doc_id.clone()))?;
                Ok(Citation {
                    doc_id: hit.doc_id,
                    chunk_id: hit.chunk_id,
                    source_name: c.source_name.clone(),
                    score: hit.score,
                    text: c.text.clone(),
                })
            })
            .collect()
    }
}

const ANSWER_INSTRUCTIONS: &str = "You answer questions about documents the user uploaded. \
Use only the numbered sources provided. Refer to a source by its number in square brackets. \
If the sources do not contain the answer, say so.";

pub(crate) fn answer_prompt(question: &str, citations: &[Citation]) -> String {
    let mut user = String::new();
    for (i, c) in citations.iter().enumerate() {
        user.push_str(&format!("[{}] {}\n{}\n\n", i + 1, c.source_name, c.text));
    }
    user.push_str("Question: ");
    user.push_str(question);
    user
}

/// Retrieves `k` chunks (at least one) and asks the provider to answer from them.
pub fn answer(
    kb: &KnowledgeBase,
    question: &str,
    k: usize,
    embedder: &dyn Embedder,
    provider: &dyn Provider,
) -> Result<GroundedAnswer, RagError> {
    let citations = kb.retrieve(question, k.max(1), embedder)?;
    let req =
        CompletionRequest::new(alloc::vec![Message::system(ANSWER_INSTRUCTIONS), Message::user(answer_prompt(question, &citations)),])
            .with_meta("pdf-assistant", 0);
    let answer_text = provider.complete(&req)?;
    Ok(GroundedAnswer { answer_text, retrieved_k: citations.len(), citations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::ProviderError;
    use crate::provider::{HashedEmbedder, EMBED_DIM};
    use alloc::vec;
    use core::cell::RefCell;

    struct Canned(&'static str, RefCell<Vec<CompletionRequest>>);
    impl Provider for Canned {
        fn complete(&self, req: &CompletionRequest) -> Result<String, ProviderError> {
            self.1.borrow_mut().push(req.clone());
            Ok(self.0.into())
        }
    }

    struct Report(&'static str, &'static str);
    impl ReportDocument for Report {
        fn title(&self) -> &str {
            self.0
        }
        fn body(&self) -> &str {
            self.1
        }
    }

    const NOTES: &str = "Agents coordinate through a shared context.\n\n\
        The data analyst translates questions into SQL queries.\n\n\
        Deep research crawls reputable sources and elaborates a report.";

    #[test]
    fn answer_grounded_in_single_doc() {
        let mut kb = KnowledgeBase::with_params(EMBED_DIM, ChunkParams { size: 60, overlap: 10, paragraph_aware: true });
        kb.add_document("platform-notes", NOTES, &HashedEmbedder).unwrap();
        let summary = "1. Shared context\n2. SQL analyst\n3. Deep research\n4. Multimodal input";
        let p = Canned(summary, RefCell::new(vec![]));
        let a = answer(&kb, "How does the analyst work?", 2, &HashedEmbedder, &p).unwrap();
        assert_eq!(a.answer_text, summary);
        assert_eq!(a.citations.len(), 2);
        assert_eq!(a.retrieved_k, 2);
        assert!(a.citations.iter().all(|c| c.source_name == "platform-notes"));
        assert!(a.citations.windows(2).all(|w| w[0].score >= w[1].score));
        for c in &a.citations {
            assert_eq!(kb.chunk(&c.doc_id, c.chunk_id).unwrap().text, c.text);
        }
        let req = &p.1.borrow()[0];
        let prompt = req.prompt_text();
        assert!(prompt.contains("platform-notes") && prompt.contains("How does the analyst work?"));
        assert_eq!(req.meta.role_label.as_deref(), Some("pdf-assistant"));
    }

    #[test]
    fn empty_index_errors() {
        let kb = KnowledgeBase::new(EMBED_DIM);
        let p = Canned("x", RefCell::new(vec![]));
        assert_eq!(answer(&kb, "q", 3, &HashedEmbedder, &p), Err(RagError::EmptyIndex));
        assert!(p.1.borrow().is_empty());
    }

    #[test]
    fn self_similarity_and_chunk_invariants() {
        let mut kb = KnowledgeBase::with_params(EMBED_DIM, ChunkParams { size: 60, overlap: 10, paragraph_aware: true });
        let id = kb.add_document("p", NOTES, &HashedEmbedder).unwrap();
        let chunks = kb.chunks_of(&id).unwrap().to_vec();
        for (i, c) in chunks.iter().enumerate() {
            assert_eq!(c.chunk_id as usize, i);
            assert!(!c.text.is_empty());
        }
        assert!(chunks.windows(2).all(|w| w[0].char_offset < w[1].char_offset));
        let target = &chunks[1];
        let hits = kb.retrieve(&target.text, 1, &HashedEmbedder).unwrap();
        assert_eq!(hits[0].chunk_id, target.chunk_id);
        assert!((hits[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reports_ingest_without_dedup() {
        let mut kb = KnowledgeBase::new(EMBED_DIM);
        let r = Report("Caregiver Sleep Strategies", "## Overview\nRoutines help.\n## Details\nKeep lights low at night.");
        let a = kb.ingest_report(&r, &HashedEmbedder).unwrap();
        let b = kb.ingest_report(&r, &HashedEmbedder).unwrap();
        assert_ne!(a, b);
        let hit = &kb.retrieve("keep lights low", 1, &HashedEmbedder).unwrap()[0];
        assert_eq!(hit.source_name, "Caregiver Sleep Strategies");
        let empty = Report("t", "");
        assert!(matches!(kb.ingest_report(&empty, &HashedEmbedder), Err(RagError::InvalidChunkParams(_))));
    }

    #[test]
    fn from_parts_roundtrip() {
        let mut kb = KnowledgeBase::new(EMBED_DIM);
        kb.add_document("a", NOTES, &HashedEmbedder).unwrap();
        let chunks: Vec<DocumentChunk> = kb.chunks_of("doc-1").unwrap().to_vec();
        let back = KnowledgeBase::from_parts(ChunkParams::default(), chunks, kb.index().clone()).unwrap();
        assert_eq!(back.retrieve("SQL", 1, &HashedEmbedder), kb.retrieve("SQL", 1, &HashedEmbedder));
        assert!(KnowledgeBase::from_parts(ChunkParams::default(), vec![], kb.index().clone()).is_err());
    }
}
