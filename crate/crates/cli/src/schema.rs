//! A small JSON Schema subset, enough for the report schema shipped in
//! `schemas/`: `type`, `enum`, `const`, `required`, `properties`,
//! `additionalProperties` (boolean or schema), `items`, `minItems`,
//! `minimum`, `maximum` and local `$ref`s into `$defs`.

use serde_json::Value;

pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");

pub fn report_schema() -> Value {
    serde_json::from_str(REPORT_SCHEMA).expect("bundled schema is valid JSON")
}

/// Every violation found, as `path: message`.
pub fn validate(instance: &Value, schema: &Value) -> Result<(), Vec<String>> {
    let mut errors = Vec::new();
    check(instance, schema, schema, "$", &mut errors);
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

fn type_matches(v: &Value, ty: &str) -> bool {
    match ty {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_u64() || v.is_i64() || v.as_f64().is_some_and(|x| x.fract() == 0.0),
        _ => false,
    }
}

fn resolve<'a>(root: &'a Value, reference: &str) -> Option<&'a Value> {
    let name = reference.strip_prefix("#/$defs/")?;
    root.get("$defs")?.get(name)
}

fn check(v: &Value, schema: &Value, root: &Value, path: &str, errors: &mut Vec<String>) {
    let Some(s) = schema.as_object() else {
        if schema == &Value::Bool(false) {
            errors.push(format!("{path}: not allowed"));
        }
        return;
    };
    if let Some(r) = s.get("$ref").and_then(Value::as_str) {
        match resolve(root, r) {
            Some(target) => check(v, target, root, path, errors),
            None => errors.push(format!("{path}: unresolved reference {r}")),
        }
    }
    if let Some(ty) = s.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(v, t),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|t| type_matches(v, t)),
            _ => true,
        };
        if !ok {
            errors.push(format!("{path}: expected type {ty}, got {v}"));
            return;
        }
    }
    if let Some(options) = s.get("enum").and_then(Value::as_array) {
        if !options.contains(v) {
            errors.push(format!("{path}: {v} not one of {}", Value::Array(options.clone())));
        }
    }
    if let Some(c) = s.get("const") {
        if c != v {
            errors.push(format!("{path}: expected {c}, got {v}"));
        }
    }
    if let Some(x) = v.as_f64() {
        if let Some(min) = s.get("minimum").and_then(Value::as_f64) {
            if x < min {
                errors.push(format!("{path}: {x} below minimum {min}"));
            }
        }
        if let Some(max) = s.get("maximum").and_then(Value::as_f64) {
            if x > max {
                errors.push(format!("{path}: {x} above maximum {max}"));
            }
        }
    }
    if let Some(obj) = v.as_object() {
        if let Some(req) = s.get("required").and_then(Value::as_array) {
            for key in req.iter().filter_map(Value::as_str) {
                if !obj.contains_key(key) {
                    errors.push(format!("{path}: missing required key '{key}'"));
                }
            }
        }
        let props = s.get("properties").and_then(Value::as_object);
        for (key, child) in obj {
            let child_path = format!("{path}.{key}");
            match props.and_then(|p| p.get(key)) {
                Some(sub) => check(child, sub, root, &child_path, errors),
                None => match s.get("additionalProperties") {
                    Some(Value::Bool(false)) => errors.push(format!("{child_path}: unexpected key")),
                    Some(sub @ Value::Object(_)) => check(child, sub, root, &child_path, errors),
                    _ => {}
                },
            }
        }
    }
    if let Some(items) = v.as_array() {
        if let Some(min) = s.get("minItems").and_then(Value::as_u64) {
            if (items.len() as u64) < min {
                errors.push(format!("{path}: fewer than {min} items"));
            }
        }
        if let Some(sub) = s.get("items") {
            for (i, item) in items.iter().enumerate() {
                check(item, sub, root, &format!("{path}[{i}]"), errors);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    #[test]
    fn bundled_schema_loads() {
        let s = report_schema();
        assert!(s.get("$defs").is_some());
    }

    #[test]
    fn subset_semantics() {
        let schema = json!({
            "type": "object",
            "required": ["a"],
            "additionalProperties": false,
            "properties": {
                "a": {"type": "number", "minimum": 0, "maximum": 1},
                "b": {"type": "array", "items": {"$ref": "#/$defs/name"}, "minItems": 1},
                "c": {"type": ["string", "null"], "enum": ["x", null]}
            },
            "$defs": {"name": {"type": "string"}}
        });
        assert!(validate(&json!({"a": 0.5, "b": ["q"], "c": null}), &schema).is_ok());
        let errs = validate(&json!({"a": 2, "b": [1], "c": "y", "d": 0}), &schema).unwrap_err();
        assert_eq!(errs.len(), 4, "{errs:?}");
        assert!(validate(&json!({"b": []}), &schema).unwrap_err().len() == 2);
        assert!(validate(&json!(3), &json!({"type": "integer"})).is_ok());
        assert!(validate(&json!(3.5), &json!({"type": "integer"})).is_err());
    }
}
