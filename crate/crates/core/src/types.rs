//! Primitive value types shared by every module: 160-bit addresses, 256-bit
//! words, and the hex/decimal text forms used by the JSON interfaces.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

pub use primitive_types::U256;

/// A 256-bit EVM machine word. Arithmetic wraps modulo 2^256.
pub type Word = U256;

/// Unbounded non-negative amount of Wei.
pub type Wei = BigUint;

/// Gas quantity. Arithmetic on gas is checked, never wrapping.
pub type Gas = u64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseValueError {
    #[error("missing 0x prefix in {0:?}")]
    MissingPrefix(String),
    #[error("invalid hex in {0:?}")]
    InvalidHex(String),
    #[error("{what} {input:?} has {got} hex digits, at most {max} allowed")]
    TooLong {
        what: &'static str,
        input: String,
        got: usize,
        max: usize,
    },
    #[error("invalid decimal integer {0:?}")]
    InvalidDecimal(String),
}

fn strip_0x(s: &str) -> Result<&str, ParseValueError> {
    s.strip_prefix("0x")
        .or_else(|| s.strip_prefix("0X"))
        .ok_or_else(|| ParseValueError::MissingPrefix(s.to_string()))
}

/// Decodes `0x`-prefixed hex of any even or odd length into bytes.
pub fn parse_hex_bytes(s: &str) -> Result<Vec<u8>, ParseValueError> {
    let body = strip_0x(s.trim())?;
    let padded;
    let body = if body.len() % 2 == 1 {
        padded = format!("0{body}");
        padded.as_str()
    } else {
        body
    };
    hex::decode(body).map_err(|_| ParseValueError::InvalidHex(s.to_string()))
}

pub fn to_hex_prefixed(bytes: &[u8]) -> String {
    format!("0x{}", hex::encode(bytes))
}

/// A 160-bit account address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0; 20]);

    /// Short-hand constructor used by tests and the synthetic corpus:
    /// `Address::from_low_u64(5)` is `0x000…05`.
    pub fn from_low_u64(v: u64) -> Self {
        let mut out = [0u8; 20];
        out[12..].copy_from_slice(&v.to_be_bytes());
        Address(out)
    }

    pub fn to_word(self) -> Word {
        Word::from_big_endian(&self.0)
    }

    /// Low 160 bits of a word.
    pub fn from_word(w: Word) -> Self {
        let bytes = w.to_big_endian();
        let mut out = [0u8; 20];
        out.copy_from_slice(&bytes[12..]);
        Address(out)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", hex::encode(self.0))
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Address {
    type Err = ParseValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let body = strip_0x(s.trim())?;
        if body.len() > 40 {
            return Err(ParseValueError::TooLong {
                what: "address",
                input: s.to_string(),
                got: body.len(),
                max: 40,
            });
        }
        let bytes = parse_hex_bytes(s)?;
        let mut out = [0u8; 20];
        out[20 - bytes.len()..].copy_from_slice(&bytes);
        Ok(Address(out))
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(de::Error::custom)
    }
}

/// Parses a `0x`-prefixed hex word of up to 64 digits.
pub fn parse_word(s: &str) -> Result<Word, ParseValueError> {
    let body = strip_0x(s.trim())?;
    if body.len() > 64 {
        return Err(ParseValueError::TooLong {
            what: "word",
            input: s.to_string(),
            got: body.len(),
            max: 64,
        });
    }
    let bytes = parse_hex_bytes(s)?;
    Ok(Word::from_big_endian(&bytes))
}

/// Canonical text form of a word: `0x` followed by 64 lowercase hex digits.
pub fn word_to_hex(w: &Word) -> String {
    format!("0x{}", hex::encode(w.to_big_endian()))
}

pub fn parse_wei(s: &str) -> Result<Wei, ParseValueError> {
    let t = s.trim();
    if t.is_empty() || !t.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseValueError::InvalidDecimal(s.to_string()));
    }
    t.parse::<BigUint>()
        .map_err(|_| ParseValueError::InvalidDecimal(s.to_string()))
}

/// Reduces a Wei amount modulo 2^256 so it can be pushed on the stack.
pub fn wei_to_word(v: &Wei) -> Word {
    let bytes = v.to_bytes_be();
    let tail = if bytes.len() > 32 { &bytes[bytes.len() - 32..] } else { &bytes[..] };
    Word::from_big_endian(tail)
}

pub fn word_to_wei(w: &Word) -> Wei {
    BigUint::from_bytes_be(&w.to_big_endian())
}

/// serde adapters for the string encodings used in scenario files.
pub mod serde_text {
    use super::*;

    pub mod word {
        use super::*;

        pub fn serialize<S: Serializer>(w: &Word, s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&word_to_hex(w))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Word, D::Error> {
            let s = String::deserialize(d)?;
            parse_word(&s).map_err(de::Error::custom)
        }
    }

    pub mod wei {
        use super::*;

        pub fn serialize<S: Serializer>(w: &Wei, s: S) -> Result<S::Ok, S::Error> {
            s.collect_str(w)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Wei, D::Error> {
            let s = String::deserialize(d)?;
            parse_wei(&s).map_err(de::Error::custom)
        }
    }

    pub mod opt_wei {
        use super::*;

        pub fn serialize<S: Serializer>(w: &Option<Wei>, s: S) -> Result<S::Ok, S::Error> {
            match w {
                Some(v) => s.collect_str(v),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Wei>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|s| parse_wei(&s).map_err(de::Error::custom))
                .transpose()
        }
    }

    pub mod bytes {
        use super::*;

        pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
            s.serialize_str(&to_hex_prefixed(b))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
            let s = String::deserialize(d)?;
            parse_hex_bytes(&s).map_err(de::Error::custom)
        }
    }

    pub mod opt_bytes {
        use super::*;

        pub fn serialize<S: Serializer>(b: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
            match b {
                Some(v) => s.serialize_str(&to_hex_prefixed(v)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
            Option::<String>::deserialize(d)?
                .map(|s| parse_hex_bytes(&s).map_err(de::Error::custom))
                .transpose()
        }
    }
}
