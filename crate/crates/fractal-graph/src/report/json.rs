//! Canonical JSON: sorted keys, two-space indentation and every float
//! written with 17 significant digits, so identical runs give identical bytes.

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// Serializes `value` canonically. Non-finite floats become `null`.
pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

/// Formats a float with 17 significant digits in exponent form.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, v: &Value, level: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").expect("string write");
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").expect("string write");
            } else {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string escapes")),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, item, level + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                indent(out, level + 1);
                out.push_str(&serde_json::to_string(k).expect("string escapes"));
                out.push_str(": ");
                write_value(out, &map[*k], level + 1);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, level);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use serde_json::json;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(1.0), "1.0000000000000000e0");
        assert_eq!(format_float(f64::INFINITY), "null");
        let s = to_canonical_json(&json!({"b": 1, "a": [0.5, true, null], "c": "x\"y"})).unwrap();
        assert_eq!(s, "{\n  \"a\": [\n    5.0000000000000000e-1,\n    true,\n    null\n  ],\n  \"b\": 1,\n  \"c\": \"x\\\"y\"\n}\n");
    }

    proptest! {
        #[test]
        fn output_parses_back_exactly(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO, i in any::<i64>()) {
            let s = to_canonical_json(&json!({"x": x, "i": i})).unwrap();
            let back: Value = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back["x"].as_f64().unwrap(), x);
            prop_assert_eq!(back["i"].as_i64().unwrap(), i);
        }
    }
}
