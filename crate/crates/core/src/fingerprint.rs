//! Canonical encoding and SHA-256 fingerprints of structured values.
//!
//! Encoding rules (shared bit-for-bit with the candidate adapter):
//!
//! - maps: `{"k":v,...}` with keys sorted by their UTF-8 bytes
//! - lists: `[a,b,...]` in order
//! - strings: JSON string escaping as produced by `serde_json`
//! - numbers: integral values with magnitude below 2^53 print as plain
//!   integers (so `1.0` and `1` agree, and `-0.0` prints `0`); every other
//!   finite number prints as the shortest round-trip mantissa and exponent,
//!   e.g. `5e-1`, `1.25e300`
//! - `true`, `false`, `null`
//!
//! No whitespace is emitted anywhere.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};
use sha2::{Digest, Sha256};

const MAX_EXACT_INT: f64 = 9_007_199_254_740_992.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CanonError {
    #[error("non-finite number {0} cannot be canonicalized")]
    NonFinite(f64),
    #[error("malformed fingerprint: {0}")]
    BadDigest(String),
}

/// 64-character lowercase hex SHA-256 digest of a canonical encoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Fingerprint(String);

impl Fingerprint {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Fingerprint {
    type Error = CanonError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        let ok = value.len() == 64
            && value.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
        if ok {
            Ok(Fingerprint(value))
        } else {
            Err(CanonError::BadDigest(value))
        }
    }
}

impl From<Fingerprint> for String {
    fn from(value: Fingerprint) -> Self {
        value.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn canonical_fingerprint(value: &Value) -> Result<Fingerprint, CanonError> {
    let encoded = canonical_encoding(value)?;
    Ok(Fingerprint(hex::encode(Sha256::digest(encoded.as_bytes()))))
}

pub fn canonical_encoding(value: &Value) -> Result<String, CanonError> {
    let mut out = String::new();
    encode_into(value, &mut out)?;
    Ok(out)
}

/// Builds a number value from a float, rejecting NaN and infinities.
pub fn finite_number(x: f64) -> Result<Value, CanonError> {
    Number::from_f64(x)
        .map(Value::Number)
        .ok_or(CanonError::NonFinite(x))
}

fn encode_into(value: &Value, out: &mut String) -> Result<(), CanonError> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => encode_number(n, out)?,
        Value::String(s) => encode_string(s, out),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                encode_into(item, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_unstable();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                encode_string(key, out);
                out.push(':');
                encode_into(&map[key], out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}

/// JSON string literal with the same escapes serde_json emits.
fn encode_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => write!(out, "\\u{:04x}", c as u32).unwrap(),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn encode_number(n: &Number, out: &mut String) -> Result<(), CanonError> {
    if let Some(i) = n.as_i64() {
        write!(out, "{i}").unwrap();
        return Ok(());
    }
    if let Some(u) = n.as_u64() {
        write!(out, "{u}").unwrap();
        return Ok(());
    }
    let x = n.as_f64().unwrap_or(f64::NAN);
    encode_float(x, out)
}

pub(crate) fn encode_float(x: f64, out: &mut String) -> Result<(), CanonError> {
    if !x.is_finite() {
        return Err(CanonError::NonFinite(x));
    }
    if x.fract() == 0.0 && x.abs() < MAX_EXACT_INT {
        write!(out, "{}", x as i64).unwrap();
    } else {
        write!(out, "{x:e}").unwrap();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn enc(v: Value) -> String {
        canonical_encoding(&v).unwrap()
    }

    #[test]
    fn empty_map_is_stable() {
        let a = canonical_fingerprint(&json!({})).unwrap();
        let b = canonical_fingerprint(&json!({})).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.as_str().len(), 64);
        // sha256("{}")
        assert_eq!(
            a.as_str(),
            "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a"
        );
    }

    #[test]
    fn key_order_is_ignored_and_list_order_is_not() {
        let ab: Value = serde_json::from_str(r#"{"a":1,"b":2}"#).unwrap();
        let ba: Value = serde_json::from_str(r#"{"b":2,"a":1}"#).unwrap();
        assert_eq!(canonical_fingerprint(&ab), canonical_fingerprint(&ba));
        assert_ne!(
            canonical_fingerprint(&json!([1, 2])),
            canonical_fingerprint(&json!([2, 1]))
        );
    }

    #[test]
    fn number_forms() {
        assert_eq!(enc(json!(1)), "1");
        assert_eq!(enc(json!(1.0)), "1");
        assert_eq!(enc(json!(-0.0)), "0");
        assert_eq!(enc(json!(-3.0)), "-3");
        assert_eq!(enc(json!(0.5)), "5e-1");
        assert_eq!(enc(json!(0.1)), "1e-1");
        assert_eq!(enc(json!(123.25)), "1.2325e2");
        assert_eq!(enc(json!(1e300)), "1e300");
        assert_eq!(enc(json!(u64::MAX)), "18446744073709551615");
        assert_eq!(enc(json!(i64::MIN)), "-9223372036854775808");
    }

    #[test]
    fn nested_layout() {
        let v = json!({"z": [true, null, "x\"y"], "a": {"d": 1, "c": 2.5}});
        assert_eq!(enc(v), r#"{"a":{"c":2.5e0,"d":1},"z":[true,null,"x\"y"]}"#);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(finite_number(f64::NAN).unwrap_err().to_string().contains("non-finite"));
        assert!(finite_number(f64::INFINITY).is_err());
        let mut s = String::new();
        assert!(encode_float(f64::NEG_INFINITY, &mut s).is_err());
    }

    #[test]
    fn digest_parse() {
        assert!(Fingerprint::try_from("ab".to_string()).is_err());
        assert!(Fingerprint::try_from("A".repeat(64)).is_err());
        assert!(Fingerprint::try_from("a".repeat(64)).is_ok());
    }
}
