//! Scenario files and dotted-path overrides.
//!
//! A scenario file is the JSON form of [`ScenarioSpec`]. Overrides address
//! any existing value by its dotted path, with array elements by index:
//! `coupling.g_value=20`, `drives.0.carrier=96`, `protocol.omega=1.5`.

use std::path::{Path, PathBuf};

use dipole_core::model::ScenarioSpec;
use serde_json::Value;

use crate::error::{Result, SimError};

/// Directory holding the bundled scenario library.
pub fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

/// Path of a bundled scenario by name, e.g. `fig1c_solid`.
pub fn bundled_path(name: &str) -> PathBuf {
    bundled_dir().join(format!("{name}.json"))
}

/// Names of all bundled scenarios, sorted.
pub fn bundled_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(bundled_dir())
        .map(|rd| {
            rd.filter_map(|e| e.ok())
                .filter_map(|e| {
                    let p = e.path();
                    (p.extension()? == "json").then(|| p.file_stem()?.to_str().map(String::from))?
                })
                .collect()
        })
        .unwrap_or_default();
    names.sort();
    names
}

pub fn read_document(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| SimError::Json { path: path.into(), source })
}

/// Parses a scenario file and applies `key=value` overrides.
pub fn load_scenario<S: AsRef<str>>(path: &Path, overrides: &[S]) -> Result<ScenarioSpec> {
    let mut doc = read_document(path)?;
    for o in overrides {
        apply_override(&mut doc, o.as_ref())?;
    }
    spec_from_document(doc, path)
}

pub fn spec_from_document(doc: Value, path: &Path) -> Result<ScenarioSpec> {
    serde_json::from_value(doc).map_err(|source| SimError::Json { path: path.into(), source })
}

/// Applies one `path=value` override. The value is parsed as JSON and taken
/// as a plain string when that fails.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| SimError::Usage(format!("override `{assignment}` is not of the form path=value")))?;
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    set_path(doc, path.trim(), value)
}

/// Replaces the value at an existing dotted path.
pub fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<()> {
    let unknown = |doc: &Value| SimError::UnknownPath { path: path.to_string(), valid: leaf_paths(doc) };
    let mut slot = Some(&mut *doc);
    for key in path.split('.') {
        slot = match slot {
            Some(Value::Object(m)) => m.get_mut(key),
            Some(Value::Array(a)) => key.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        };
    }
    let Some(slot) = slot else {
        return Err(unknown(doc));
    };
    if !compatible(slot, &value) {
        return Err(SimError::TypeMismatch {
            path: path.to_string(),
            message: format!("expected {}, got {}", kind(slot), kind(&value)),
        });
    }
    *slot = value;
    Ok(())
}

fn is_pair(v: &Value) -> bool {
    matches!(v, Value::Array(a) if a.len() == 2 && a.iter().all(Value::is_number))
}

// complex fields accept a bare number or an [re, im] pair
fn compatible(old: &Value, new: &Value) -> bool {
    match (old, new) {
        (Value::Number(_), Value::Number(_)) => true,
        (Value::Number(_), v) | (v, Value::Number(_)) => is_pair(v),
        (Value::Null, _) => true,
        (a, b) => std::mem::discriminant(a) == std::mem::discriminant(b),
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

/// Dotted paths of every scalar in the document, in document order.
pub fn leaf_paths(doc: &Value) -> Vec<String> {
    fn walk(v: &Value, prefix: &str, out: &mut Vec<String>) {
        let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(m) => m.iter().for_each(|(k, c)| walk(c, &join(k), out)),
            Value::Array(a) if !is_pair(v) => a.iter().enumerate().for_each(|(i, c)| walk(c, &join(&i.to_string()), out)),
            _ => out.push(prefix.to_string()),
        }
    }
    let mut out = Vec::new();
    walk(doc, "", &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn override_existing_scalar() {
        let mut doc = json!({"coupling": {"g_value": 4.0}, "drives": [{"carrier": 92.0}]});
        apply_override(&mut doc, "coupling.g_value=20").unwrap();
        apply_override(&mut doc, "drives.0.carrier=96.5").unwrap();
        assert_eq!(doc, json!({"coupling": {"g_value": 20}, "drives": [{"carrier": 96.5}]}));
    }

    #[test]
    fn complex_value_may_replace_number() {
        let mut doc = json!({"g_value": 4.0});
        apply_override(&mut doc, "g_value=[1, 2]").unwrap();
        assert_eq!(doc["g_value"], json!([1, 2]));
    }

    #[test]
    fn unknown_path_lists_valid_ones() {
        let mut doc = json!({"coupling": {"g_value": 4.0}, "drives": [{"carrier": 92.0, "amplitude": [1.0, 0.5]}]});
        match apply_override(&mut doc, "coupling.nope=1") {
            Err(SimError::UnknownPath { valid, .. }) => {
                assert_eq!(valid, vec!["coupling.g_value", "drives.0.amplitude", "drives.0.carrier"]);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(apply_override(&mut doc, "drives.3.carrier=1"), Err(SimError::UnknownPath { .. })));
    }

    #[test]
    fn type_mismatch() {
        let mut doc = json!({"coupling": {"g_value": 4.0}});
        let e = apply_override(&mut doc, "coupling.g_value=strong").unwrap_err();
        assert!(matches!(e, SimError::TypeMismatch { .. }));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn malformed_assignment() {
        let mut doc = json!({});
        assert!(matches!(apply_override(&mut doc, "g_value"), Err(SimError::Usage(_))));
    }
}
