//! JSON and JSON-lines file helpers.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::algebra::RigidMotion;
use crate::error::{MpgError, Result};

/// Reads a JSON document; parse errors name `what` and the path of the
/// offending field inside it.
pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| MpgError::Io(format!("{}: {e}", path.display())))?;
    from_json_str(&text, what)
}

pub fn from_json_str<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." {
            what.to_owned()
        } else {
            format!("{what}: {path}")
        };
        MpgError::field(field, e.into_inner().to_string())
    })?;
    de.end().map_err(|e| MpgError::field(what, e.to_string()))?;
    Ok(value)
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json_string(value))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| MpgError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| MpgError::Io(format!("{}: {e}", path.display())))
}

/// One motion per line.
pub fn motions_to_jsonl(motions: &[RigidMotion]) -> String {
    let mut out = String::new();
    for m in motions {
        out.push_str(&serde_json::to_string(m).expect("motion serializes"));
        out.push('\n');
    }
    out
}

/// Parses one motion per non-blank line.
pub fn motions_from_jsonl(text: &str) -> Result<Vec<RigidMotion>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| MpgError::field(format!("line {}", i + 1), e.to_string())))
        .collect()
}

pub fn read_motions(path: &Path) -> Result<Vec<RigidMotion>> {
    let text = fs::read_to_string(path).map_err(|e| MpgError::Io(format!("{}: {e}", path.display())))?;
    motions_from_jsonl(&text)
}
