//! Rendering of command results. CSV output starts with one `#` comment
//! line carrying the full run configuration; JSON output embeds it under
//! `config`. Floats are written at six significant digits in both.

use clustcv::fmt::sig6;
use serde::Serialize;
use serde_json::{json, Value};

/// Comment line describing the run, e.g. `# clustcv select {...}`.
pub fn config_comment<C: Serialize>(command: &str, config: &C) -> anyhow::Result<String> {
    Ok(format!("# clustcv {command} {}\n", serde_json::to_string(config)?))
}

/// Round every non-integer number to six significant digits.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            if let Some(r) = sig6(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// `{"command": ..., "config": ..., <body fields>}` with rounded floats.
pub fn json_document<C: Serialize, B: Serialize>(command: &str, config: &C, body: &B) -> anyhow::Result<String> {
    let mut doc = json!({ "command": command, "config": config });
    let body = serde_json::to_value(body)?;
    let Value::Object(fields) = body else {
        anyhow::bail!("JSON body must be an object");
    };
    doc.as_object_mut().expect("object").extend(fields);
    round_floats(&mut doc);
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    Ok(text)
}

pub fn csv_text(write: impl FnOnce(&mut Vec<u8>) -> clustcv::Result<()>) -> anyhow::Result<String> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(String::from_utf8(buf)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_keeps_integers() {
        let mut v = json!({"k": 3, "e": [0.123456789, 2.0], "nested": {"x": 1e-7}});
        round_floats(&mut v);
        assert_eq!(v.to_string(), r#"{"e":[0.123457,2.0],"k":3,"nested":{"x":1e-7}}"#);
    }
}
