//! Canonical JSON: sorted object keys and every float written with 17
//! significant digits, so equal values always produce identical bytes.

use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::Formatter;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "v1";

struct CanonicalFormatter;

impl Formatter for CanonicalFormatter {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes through `serde_json::Value`, whose map type keeps keys sorted.
pub fn to_canonical_string<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CanonicalFormatter);
    v.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Parses `text`, reporting failures with a JSON-pointer path.
pub fn from_str_with_path<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = path_to_pointer(e.path());
        Error::Schema { pointer, message: e.into_inner().to_string() }
    })
}

fn path_to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

pub fn write_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = to_canonical_string(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    from_str_with_path(&text)
}

/// SHA-256 hex digest of the canonical encoding.
pub fn digest<T: Serialize>(value: &T) -> Result<String> {
    use sha2::{Digest, Sha256};
    let text = to_canonical_string(value)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

/// Checks the `"schema"` tag carried by top-level documents.
pub fn check_schema(tag: &str) -> Result<()> {
    if tag == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::Schema {
            pointer: "/schema".into(),
            message: format!("unsupported schema {tag:?}, expected {SCHEMA_VERSION:?}"),
        })
    }
}
