//! Byte-level primitives shared by the registry and the ledger: account
//! addresses and 32-byte digests, both rendered as lowercase hex.

use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Length of an [`Address`] in bytes.
pub const ADDRESS_LEN: usize = 20;

/// Length of a [`Digest`] in bytes.
pub const DIGEST_LEN: usize = 32;

/// An account address: a fixed-length digest of a public key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; ADDRESS_LEN]);

/// A 32-byte hash digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest(pub [u8; DIGEST_LEN]);

#[derive(Debug, thiserror::Error)]
#[error("invalid hex string: {0}")]
pub struct HexError(String);

fn encode_hex(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn decode_hex(s: &str, expected_len: usize) -> Result<Vec<u8>, HexError> {
    if s.len() != expected_len * 2 {
        return Err(HexError(format!(
            "expected {} hex chars, got {}",
            expected_len * 2,
            s.len()
        )));
    }
    (0..expected_len)
        .map(|i| {
            u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .map_err(|_| HexError(format!("non-hex byte at offset {}", 2 * i)))
        })
        .collect()
}

macro_rules! hex_newtype {
    ($ty:ident, $len:expr) => {
        impl $ty {
            pub fn as_bytes(&self) -> &[u8] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                encode_hex(&self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, HexError> {
                let bytes = decode_hex(s, $len)?;
                let mut arr = [0u8; $len];
                arr.copy_from_slice(&bytes);
                Ok(Self(arr))
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($ty), "({})"), self.to_hex())
            }
        }

        impl FromStr for $ty {
            type Err = HexError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::from_hex(s)
            }
        }

        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                struct HexVisitor;

                impl<'de> Visitor<'de> for HexVisitor {
                    type Value = $ty;

                    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                        write!(f, "a {}-char hex string", $len * 2)
                    }

                    fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                        $ty::from_hex(v).map_err(de::Error::custom)
                    }
                }

                deserializer.deserialize_str(HexVisitor)
            }
        }
    };
}

hex_newtype!(Address, ADDRESS_LEN);
hex_newtype!(Digest, DIGEST_LEN);
