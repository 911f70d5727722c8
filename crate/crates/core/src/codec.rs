//! Canonical byte encoding used for state roots and signature preimages.
//!
//! The encoding is order-stable by construction: struct fields are emitted in
//! lexicographic order of their field names, integers are fixed-width
//! big-endian, floats are their IEEE-754 bit patterns, and all lists and maps
//! are length-prefixed (maps iterate in key order). Two states that compare
//! equal always encode to identical bytes.

use std::collections::BTreeMap;

use sha2::{Digest as _, Sha256};

use crate::graph::{RNftRecord, ReferenceGraph, TokenId};
use crate::primitives::{Address, Digest};

/// Accumulates canonical bytes.
#[derive(Default)]
pub struct CanonicalWriter {
    buf: Vec<u8>,
}

impl CanonicalWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    /// IEEE-754 bit pattern, big-endian.
    pub fn put_f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_bits().to_be_bytes());
    }

    /// Length-prefixed raw bytes.
    pub fn put_bytes(&mut self, v: &[u8]) {
        self.put_u64(v.len() as u64);
        self.buf.extend_from_slice(v);
    }

    pub fn put_str(&mut self, v: &str) {
        self.put_bytes(v.as_bytes());
    }

    /// Length prefix for a list; the caller emits the items.
    pub fn put_len(&mut self, len: usize) {
        self.put_u64(len as u64);
    }

    pub fn put_string_map(&mut self, map: &BTreeMap<String, String>) {
        self.put_len(map.len());
        for (k, v) in map {
            self.put_str(k);
            self.put_str(v);
        }
    }
}

/// SHA-256 of a byte slice.
pub fn sha256(bytes: &[u8]) -> Digest {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    Digest(hasher.finalize().into())
}

pub fn encode_token_ids(w: &mut CanonicalWriter, ids: &[TokenId]) {
    w.put_len(ids.len());
    for id in ids {
        w.put_u64(id.value());
    }
}

fn encode_record(w: &mut CanonicalWriter, record: &RNftRecord) {
    // fields: owner, relationship, tokenId
    w.put_bytes(record.owner.as_bytes());
    let rel = &record.relationship;
    // relationship fields: createdHeight, createdTimestamp, intraBlockIndex,
    // labels, profitSharing, referred, referring
    w.put_u64(rel.created_height);
    w.put_u64(rel.created_timestamp);
    w.put_u32(rel.intra_block_index);
    w.put_len(rel.labels.len());
    for label in &rel.labels {
        w.put_str(label);
    }
    w.put_len(rel.profit_sharing.len());
    for weight in &rel.profit_sharing {
        w.put_f64(*weight);
    }
    encode_token_ids(w, &rel.referred);
    encode_token_ids(w, &rel.referring);
    w.put_u64(record.token_id.value());
}

/// Canonical bytes of a registry: `nextTokenId`, then records in id order.
pub fn encode_graph(graph: &ReferenceGraph) -> Vec<u8> {
    let mut w = CanonicalWriter::new();
    w.put_str("rnft.graph.v1");
    w.put_u64(graph.next_token_id().value());
    w.put_len(graph.len());
    for record in graph.records() {
        encode_record(&mut w, record);
    }
    w.into_bytes()
}

/// Digest of the canonical registry encoding.
pub fn graph_digest(graph: &ReferenceGraph) -> Digest {
    sha256(&encode_graph(graph))
}

/// Canonical bytes of the account table (address-sorted).
pub fn encode_accounts(accounts: &BTreeMap<Address, u64>) -> Vec<u8> {
    let mut w = CanonicalWriter::new();
    w.put_str("rnft.accounts.v1");
    w.put_len(accounts.len());
    for (addr, nonce) in accounts {
        w.put_bytes(addr.as_bytes());
        w.put_u64(*nonce);
    }
    w.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writer_is_length_prefixed() {
        let mut w = CanonicalWriter::new();
        w.put_bytes(b"ab");
        let bytes = w.into_bytes();
        assert_eq!(&bytes[..8], &2u64.to_be_bytes());
        assert_eq!(&bytes[8..], b"ab");
    }

    #[test]
    fn f64_encoding_is_bit_pattern() {
        let mut w = CanonicalWriter::new();
        w.put_f64(0.5);
        assert_eq!(w.into_bytes(), 0.5f64.to_bits().to_be_bytes());
    }

    #[test]
    fn equal_maps_encode_identically() {
        let mut a = BTreeMap::new();
        a.insert("k1".to_string(), "v1".to_string());
        a.insert("k0".to_string(), "v0".to_string());
        let mut b = BTreeMap::new();
        b.insert("k0".to_string(), "v0".to_string());
        b.insert("k1".to_string(), "v1".to_string());
        let mut wa = CanonicalWriter::new();
        wa.put_string_map(&a);
        let mut wb = CanonicalWriter::new();
        wb.put_string_map(&b);
        assert_eq!(wa.into_bytes(), wb.into_bytes());
    }
}
