//! Identities and transaction signatures.
//!
//! The scheme is pluggable behind [`SignatureScheme`]; the default
//! [`KeyedDigest`] derives keys and signatures from SHA-256 with domain
//! separation. It gives the simulator what it needs — determinism, key
//! binding, and tamper detection — without real cryptographic hardening,
//! which is out of scope for a single-node ledger.

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::primitives::{Address, ADDRESS_LEN};

pub const KEY_LEN: usize = 32;
pub const SIGNATURE_LEN: usize = 32;

pub type SecretKey = [u8; KEY_LEN];
pub type PublicKey = [u8; KEY_LEN];
pub type Signature = [u8; SIGNATURE_LEN];

/// A secret/public key pair. The public key is a pure function of the secret.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyPair {
    #[serde(with = "serde_key")]
    pub sk: SecretKey,
    #[serde(with = "serde_key")]
    pub pk: PublicKey,
}

mod serde_key {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(key: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&key.iter().map(|b| format!("{b:02x}")).collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let hex = String::deserialize(d)?;
        if hex.len() != 64 {
            return Err(serde::de::Error::custom("expected 64 hex chars"));
        }
        let mut out = [0u8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(serde::de::Error::custom)?;
        }
        Ok(out)
    }
}

/// Sign/verify roles required by the ledger.
pub trait SignatureScheme {
    fn derive_pk(&self, sk: &SecretKey) -> PublicKey;
    fn sign(&self, sk: &SecretKey, message: &[u8]) -> Signature;
    fn verify(&self, pk: &PublicKey, message: &[u8], signature: &Signature) -> bool;
}

/// Default simulator scheme: SHA-256 with domain tags. Signatures bind the
/// signer's public key to the message; verification recomputes the digest.
#[derive(Clone, Copy, Debug, Default)]
pub struct KeyedDigest;

fn tagged_sha256(tag: &str, parts: &[&[u8]]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    for part in parts {
        hasher.update(part);
    }
    hasher.finalize().into()
}

impl SignatureScheme for KeyedDigest {
    fn derive_pk(&self, sk: &SecretKey) -> PublicKey {
        tagged_sha256("rnft.pk.v1", &[sk])
    }

    fn sign(&self, sk: &SecretKey, message: &[u8]) -> Signature {
        let pk = self.derive_pk(sk);
        tagged_sha256("rnft.sig.v1", &[&pk, message])
    }

    fn verify(&self, pk: &PublicKey, message: &[u8], signature: &Signature) -> bool {
        tagged_sha256("rnft.sig.v1", &[pk, message]) == *signature
    }
}

/// Deterministically derives a key pair from a seed using the default scheme.
pub fn key_gen(seed: &[u8]) -> KeyPair {
    let sk = tagged_sha256("rnft.sk.v1", &[seed]);
    let pk = KeyedDigest.derive_pk(&sk);
    KeyPair { sk, pk }
}

/// Derives the account address for a public key.
pub fn address_gen(pk: &PublicKey) -> Address {
    let digest = tagged_sha256("rnft.addr.v1", &[pk]);
    let mut addr = [0u8; ADDRESS_LEN];
    addr.copy_from_slice(&digest[..ADDRESS_LEN]);
    Address(addr)
}

impl KeyPair {
    pub fn address(&self) -> Address {
        address_gen(&self.pk)
    }
}
