//! Canonical JSON: sorted object keys, floats printed with exactly six
//! decimals, integers as integers, no insignificant whitespace. Two values
//! are semantically equal iff their canonical texts are byte-equal.

use serde::Serialize;
use serde_json::Value;
use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum CanonicalError {
    #[error("serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("non-finite number cannot be serialized")]
    NonFinite,
}

pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String, CanonicalError> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, &mut out)?;
    Ok(out)
}

pub fn value_to_canonical_string(v: &Value) -> Result<String, CanonicalError> {
    let mut out = String::new();
    write_value(v, &mut out)?;
    Ok(out)
}

fn write_value(v: &Value, out: &mut String) -> Result<(), CanonicalError> {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let f = n.as_f64().ok_or(CanonicalError::NonFinite)?;
                if !f.is_finite() {
                    return Err(CanonicalError::NonFinite);
                }
                let text = format!("{f:.6}");
                // "-0.000000" and "0.000000" are the same value.
                if text.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
                    out.push_str("0.000000");
                } else {
                    out.push_str(&text);
                }
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s)?);
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k)?);
                out.push(':');
                write_value(&map[*k], out)?;
            }
            out.push('}');
        }
    }
    Ok(())
}
