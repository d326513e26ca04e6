//! Dynamically typed cell values as returned by SQLite.

use std::fmt;

use rusqlite::types::ValueRef;
use serde::{Serialize, Serializer};

#[derive(Debug, Clone, PartialEq)]
pub enum SqlValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

impl SqlValue {
    pub fn from_ref(value: ValueRef<'_>) -> Self {
        match value {
            ValueRef::Null => SqlValue::Null,
            ValueRef::Integer(i) => SqlValue::Integer(i),
            ValueRef::Real(r) => SqlValue::Real(r),
            ValueRef::Text(t) => SqlValue::Text(String::from_utf8_lossy(t).into_owned()),
            ValueRef::Blob(b) => SqlValue::Blob(b.to_vec()),
        }
    }

    pub fn is_null(&self) -> bool {
        matches!(self, SqlValue::Null)
    }

    /// Plain text form without quoting, matching what `CAST(x AS TEXT)` yields
    /// for the common cases. `None` for NULL.
    pub fn as_text(&self) -> Option<String> {
        match self {
            SqlValue::Null => None,
            SqlValue::Integer(i) => Some(i.to_string()),
            SqlValue::Real(r) => Some(format_real(*r)),
            SqlValue::Text(t) => Some(t.clone()),
            SqlValue::Blob(b) => Some(String::from_utf8_lossy(b).into_owned()),
        }
    }

    /// Comparison key used when matching result sets: integer-valued reals
    /// collapse onto the equivalent integer.
    pub fn comparison_key(&self) -> String {
        match self {
            SqlValue::Null => "n:".to_string(),
            SqlValue::Integer(i) => format!("i:{i}"),
            SqlValue::Real(r) if r.fract() == 0.0 && r.abs() < 9.0e15 => {
                format!("i:{}", *r as i64)
            }
            SqlValue::Real(r) => format!("r:{r:?}"),
            SqlValue::Text(t) => format!("t:{t}"),
            SqlValue::Blob(b) => format!("b:{}", hex_string(b)),
        }
    }

    /// Rendering used inside prompts: text quoted, NULL as a bare token,
    /// long cells cut at `max_chars` with an ellipsis.
    pub fn render_for_prompt(&self, max_chars: usize) -> String {
        match self {
            SqlValue::Null => "NULL".to_string(),
            SqlValue::Text(t) => format!("'{}'", truncate_chars(t, max_chars)),
            SqlValue::Blob(b) => format!("x'{}'", truncate_chars(&hex_string(b), max_chars)),
            other => other.to_string(),
        }
    }
}

impl fmt::Display for SqlValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SqlValue::Null => f.write_str("NULL"),
            SqlValue::Integer(i) => write!(f, "{i}"),
            SqlValue::Real(r) => f.write_str(&format_real(*r)),
            SqlValue::Text(t) => f.write_str(t),
            SqlValue::Blob(b) => write!(f, "x'{}'", hex_string(b)),
        }
    }
}

impl Serialize for SqlValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            SqlValue::Null => serializer.serialize_none(),
            SqlValue::Integer(i) => serializer.serialize_i64(*i),
            SqlValue::Real(r) if r.is_finite() => serializer.serialize_f64(*r),
            SqlValue::Real(r) => serializer.serialize_str(&r.to_string()),
            SqlValue::Text(t) => serializer.serialize_str(t),
            SqlValue::Blob(b) => serializer.serialize_str(&format!("x'{}'", hex_string(b))),
        }
    }
}

fn format_real(r: f64) -> String {
    if r.is_finite() && r.fract() == 0.0 && r.abs() < 1e15 {
        format!("{r:.1}")
    } else {
        format!("{r}")
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn truncate_chars(text: &str, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        text.to_string()
    } else {
        let mut out: String = text.chars().take(max_chars).collect();
        out.push('…');
        out
    }
}
