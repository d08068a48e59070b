//! Shared test support: a validator for the JSON Schema subset used by the
//! shipped schema files (draft-07 keywords: type, properties, required,
//! additionalProperties, items, enum, const, oneOf, minimum, maximum,
//! exclusiveMinimum and local `#/$defs/...` references).

use serde_json::Value;

pub fn validate(schema: &Value, root: &Value, instance: &Value) -> Result<(), String> {
    validate_at(schema, root, instance, "$")
}

fn validate_at(schema: &Value, root: &Value, instance: &Value, path: &str) -> Result<(), String> {
    let obj = schema
        .as_object()
        .ok_or_else(|| format!("{path}: schema node is not an object"))?;

    if let Some(reference) = obj.get("$ref").and_then(Value::as_str) {
        let target = resolve_ref(root, reference)
            .ok_or_else(|| format!("{path}: unresolvable $ref {reference}"))?;
        return validate_at(target, root, instance, path);
    }

    if let Some(expected) = obj.get("const") {
        if instance != expected {
            return Err(format!("{path}: expected const {expected}, got {instance}"));
        }
    }

    if let Some(options) = obj.get("enum").and_then(Value::as_array) {
        if !options.contains(instance) {
            return Err(format!("{path}: {instance} not in enum {options:?}"));
        }
    }

    if let Some(types) = obj.get("type") {
        let allowed: Vec<&str> = match types {
            Value::String(s) => vec![s.as_str()],
            Value::Array(list) => list.iter().filter_map(Value::as_str).collect(),
            other => return Err(format!("{path}: bad type keyword {other}")),
        };
        if !allowed.iter().any(|t| matches_type(t, instance)) {
            return Err(format!("{path}: {instance} does not match type {allowed:?}"));
        }
    }

    if let Some(number) = instance.as_f64() {
        if let Some(min) = obj.get("minimum").and_then(Value::as_f64) {
            if number < min {
                return Err(format!("{path}: {number} below minimum {min}"));
            }
        }
        if let Some(max) = obj.get("maximum").and_then(Value::as_f64) {
            if number > max {
                return Err(format!("{path}: {number} above maximum {max}"));
            }
        }
        if let Some(min) = obj.get("exclusiveMinimum").and_then(Value::as_f64) {
            if number <= min {
                return Err(format!("{path}: {number} not above {min}"));
            }
        }
    }

    if let Some(map) = instance.as_object() {
        if let Some(required) = obj.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !map.contains_key(key) {
                    return Err(format!("{path}: missing required property {key}"));
                }
            }
        }
        let properties = obj.get("properties").and_then(Value::as_object);
        if let Some(props) = properties {
            for (key, sub) in props {
                if let Some(value) = map.get(key) {
                    validate_at(sub, root, value, &format!("{path}.{key}"))?;
                }
            }
        }
        if obj.get("additionalProperties") == Some(&Value::Bool(false)) {
            for key in map.keys() {
                if !properties.is_some_and(|p| p.contains_key(key)) {
                    return Err(format!("{path}: unexpected property {key}"));
                }
            }
        }
    }

    if let Some(list) = instance.as_array() {
        if let Some(items) = obj.get("items") {
            for (idx, item) in list.iter().enumerate() {
                validate_at(items, root, item, &format!("{path}[{idx}]"))?;
            }
        }
    }

    if let Some(branches) = obj.get("oneOf").and_then(Value::as_array) {
        let mut matches = 0;
        let mut errors = Vec::new();
        for branch in branches {
            match validate_at(branch, root, instance, path) {
                Ok(()) => matches += 1,
                Err(e) => errors.push(e),
            }
        }
        if matches != 1 {
            return Err(format!(
                "{path}: {matches} oneOf branches matched (want exactly 1); {errors:?}"
            ));
        }
    }

    Ok(())
}

fn matches_type(name: &str, instance: &Value) -> bool {
    match name {
        "object" => instance.is_object(),
        "array" => instance.is_array(),
        "string" => instance.is_string(),
        "boolean" => instance.is_boolean(),
        "null" => instance.is_null(),
        "number" => instance.is_number(),
        "integer" => {
            instance.is_i64()
                || instance.is_u64()
                || instance.as_f64().is_some_and(|f| f.fract() == 0.0)
        }
        _ => false,
    }
}

fn resolve_ref<'a>(root: &'a Value, reference: &str) -> Option<&'a Value> {
    let mut node = root;
    for part in reference.strip_prefix("#/")?.split('/') {
        node = node.get(part)?;
    }
    Some(node)
}

/// Loads a schema from the workspace `schemas/` directory.
pub fn load_schema(name: &str) -> Value {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../schemas")
        .join(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    serde_json::from_str(&text).expect("schema file parses")
}

/// Asserts that a JSON document validates against a shipped schema.
pub fn assert_valid(schema_file: &str, instance: &Value) {
    let schema = load_schema(schema_file);
    if let Err(e) = validate(&schema, &schema, instance) {
        panic!("schema validation ({schema_file}) failed: {e}");
    }
}
