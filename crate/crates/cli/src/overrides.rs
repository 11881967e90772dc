//! `--set key=value` overrides on the raw JSON config.

use poresim::{Error, Result};
use serde_json::{Map, Value};

/// Parses `value` as JSON, falling back to a plain string.
fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

/// Applies one `a.b.c=value` assignment. Missing objects are created;
/// numeric segments index into existing arrays.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::Input(format!(
            "override `{assignment}` is not of the form key=value"
        ))
    })?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Input(format!(
            "override key `{key}` has an empty segment"
        )));
    }
    let mut cur = root;
    for seg in key.split('.') {
        if cur.is_null() {
            *cur = Value::Object(Map::new());
        }
        cur = match cur {
            Value::Object(map) => map.entry(seg.to_string()).or_insert(Value::Null),
            Value::Array(items) => {
                let len = items.len();
                let i: usize = seg.parse().map_err(|_| {
                    Error::Input(format!("override `{key}`: `{seg}` is not an array index"))
                })?;
                items.get_mut(i).ok_or_else(|| {
                    Error::Input(format!("override `{key}`: index {i} out of range ({len})"))
                })?
            }
            _ => {
                return Err(Error::Input(format!(
                    "override `{key}`: cannot descend into a scalar at `{seg}`"
                )))
            }
        };
    }
    *cur = parse_value(raw.trim());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_creation_and_types() {
        let mut v = json!({"simulation": {"n_steps": 3}, "a": [1, 2]});
        apply_override(&mut v, "simulation.n_steps=10").unwrap();
        apply_override(&mut v, "outputs.dir=run one").unwrap();
        apply_override(&mut v, "a.1=[0.5, 1]").unwrap();
        apply_override(&mut v, "precision=\"f32\"").unwrap();
        assert_eq!(
            v,
            json!({"simulation": {"n_steps": 10}, "outputs": {"dir": "run one"}, "a": [1, [0.5, 1]], "precision": "f32"})
        );
    }

    #[test]
    fn rejects_malformed() {
        let mut v = json!({"x": 1, "a": []});
        assert!(apply_override(&mut v, "novalue").is_err());
        assert!(apply_override(&mut v, "x.y=1").is_err());
        assert!(apply_override(&mut v, "a.0=1").is_err());
        assert!(apply_override(&mut v, "a..b=1").is_err());
    }
}
