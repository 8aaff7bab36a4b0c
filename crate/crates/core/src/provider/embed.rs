use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::ProviderError;

/// Dimension of the hashed bag-of-words embedder.
pub const EMBED_DIM: usize = 256;

pub trait Embedder {
    fn dim(&self) -> usize;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError>;

    fn embed_one(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let mut v = self.embed(&[String::from(text)])?;
        Ok(v.pop().unwrap_or_default())
    }
}

/// Deterministic, order-insensitive embedder.
///
/// Tokens are lowercased alphanumeric runs; each token increments bucket
/// `fnv1a64(token) % 256`; the count vector is L2-normalized. Text with no
/// tokens maps to the zero vector.
#[derive(Clone, Copy, Debug, Default)]
pub struct HashedEmbedder;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub(crate) fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(|t| t.to_lowercase())
}

impl HashedEmbedder {
    pub fn vector(&self, text: &str) -> Vec<f32> {
        let mut counts = vec![0f64; EMBED_DIM];
        for t in tokens(text) {
            counts[(fnv1a64(t.as_bytes()) % EMBED_DIM as u64) as usize] += 1.0;
        }
        let norm = libm::sqrt(counts.iter().map(|c| c * c).sum::<f64>());
        if norm == 0.0 {
            return vec![0.0; EMBED_DIM];
        }
        counts.iter().map(|c| (c / norm) as f32).collect()
    }
}

impl Embedder for HashedEmbedder {
    fn dim(&self) -> usize {
        EMBED_DIM
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, ProviderError> {
        if texts.is_empty() {
            return Err(ProviderError::InvalidRequest("nothing to embed".into()));
        }
        if texts.iter().any(|t| t.is_empty()) {
            return Err(ProviderError::InvalidRequest("cannot embed empty text".into()));
        }
        Ok(texts.iter().map(|t| self.vector(t)).collect())
    }
}

/// Cosine similarity computed in f64. Zero vectors score 0.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (*x as f64, *y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (libm::sqrt(na) * libm::sqrt(nb))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f32]) -> f64 {
        libm::sqrt(v.iter().map(|x| (*x as f64) * (*x as f64)).sum())
    }

    #[test]
    fn deterministic() {
        let e = HashedEmbedder;
        let a = e.embed(&[String::from("a")]).unwrap();
        let b = e.embed(&[String::from("a")]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_norm() {
        let e = HashedEmbedder;
        for t in ["a", "Sundowning at home, late-day confusion", "x y z x y z q"] {
            assert!((norm(&e.vector(t)) - 1.0).abs() <= 1e-6, "{t}");
        }
    }

    #[test]
    fn bag_of_words_hand_computed() {
        // fnv1a64("apple") = 0xf74a62a458befdbf -> bucket 191
        // fnv1a64("banana") = 0xb4d3b6b1c372c890 -> bucket 144
        assert_eq!(fnv1a64(b"apple") % 256, 191);
        assert_eq!(fnv1a64(b"banana") % 256, 144);
        let e = HashedEmbedder;
        let v = e.vector("apple banana");
        assert_eq!(v, e.vector("banana apple"));
        let half = (1.0f64 / libm::sqrt(2.0)) as f32;
        for (i, x) in v.iter().enumerate() {
            let want = if i == 191 || i == 144 { half } else { 0.0 };
            assert_eq!(*x, want, "bucket {i}");
        }
    }

    #[test]
    fn case_and_punctuation_insensitive() {
        let e = HashedEmbedder;
        assert_eq!(e.vector("Apple, BANANA!"), e.vector("apple banana"));
    }

    #[test]
    fn rejects_empty() {
        assert!(HashedEmbedder.embed(&[]).is_err());
        assert!(HashedEmbedder.embed(&[String::new()]).is_err());
    }
}
