use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        Value::Array(items) => out.push((prefix.to_string(), items.iter().map(cell).collect::<Vec<_>>().join(";"))),
        other => out.push((prefix.to_string(), cell(other))),
    }
}

/// Comma-separated table of serializable rows; nested fields get dotted
/// column names, `None` becomes an empty cell. All rows must share a shape.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut header: Option<Vec<String>> = None;
    let mut out = String::new();
    for row in rows {
        let mut fields = Vec::new();
        flatten("", &serde_json::to_value(row)?, &mut fields);
        let keys: Vec<String> = fields.iter().map(|f| f.0.clone()).collect();
        match &header {
            None => {
                out.push_str(&keys.join(","));
                out.push('\n');
                header = Some(keys);
            }
            Some(h) if *h != keys => anyhow::bail!("rows do not share the same columns"),
            Some(_) => {}
        }
        let line: Vec<String> = fields
            .into_iter()
            .map(|(_, v)| {
                if v.contains([',', '"', '\n']) {
                    format!("\"{}\"", v.replace('"', "\"\""))
                } else {
                    v
                }
            })
            .collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    Ok(out)
}
