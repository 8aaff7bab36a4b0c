//! SHA-256 content digests over canonical JSON.
//!
//! Object keys are sorted before hashing, so the digest does not depend on
//! insertion order even when a dependent crate turns on `preserve_order`.

use alloc::string::String;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

const HEX: &[u8; 16] = b"0123456789abcdef";

pub fn sha256_hex(bytes: &[u8]) -> String {
    let out = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in out.iter() {
        s.push(HEX[(b >> 4) as usize] as char);
        s.push(HEX[(b & 0x0f) as usize] as char);
    }
    s
}

/// Digest of any serializable value after canonicalization through [`Value`].
pub fn digest_of<T: Serialize + ?Sized>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(v) => digest_value(&v),
        Err(_) => sha256_hex(b""),
    }
}

pub fn digest_value(value: &Value) -> String {
    let mut canonical = value.clone();
    canonical.sort_all_objects();
    sha256_hex(&serde_json::to_vec(&canonical).unwrap_or_default())
}
