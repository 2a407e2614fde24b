use anyhow::Result;
use serde::Serialize;
use serde_json::Value;

use crate::args::Format;

/// A verb's result: canonical JSON plus optional hand-made CSV and table views.
/// Verbs without a natural tabular form fall back to flattened key/value rows.
pub struct Output {
    pub json: Value,
    pub csv: Option<String>,
    pub table: Option<String>,
}

impl Output {
    pub fn new(value: &impl Serialize) -> Result<Self> {
        Ok(Output {
            json: serde_json::to_value(value)?,
            csv: None,
            table: None,
        })
    }

    pub fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    pub fn with_table(mut self, table: String) -> Self {
        self.table = Some(table);
        self
    }

    pub fn render(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Json => {
                let mut s = pvbs_core::json::to_canonical_pretty(&self.json)?;
                s.push('\n');
                s
            }
            Format::Csv => match &self.csv {
                Some(c) => c.clone(),
                None => {
                    let mut s = String::from("key,value\n");
                    for (k, v) in flatten(&self.json) {
                        s.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&v)));
                    }
                    s
                }
            },
            Format::Table => match &self.table {
                Some(t) => t.clone(),
                None => {
                    let rows: Vec<Vec<String>> = flatten(&self.json).into_iter().map(|(k, v)| vec![k, v]).collect();
                    table(&["key", "value"], &rows)
                }
            },
        })
    }
}

/// Float text used in CSV and tables, matching the JSON rendering.
pub fn float(x: f64) -> String {
    if x == 0.0 {
        "0.0000000000000000e0".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => float(n.as_f64().unwrap()),
        other => other.to_string(),
    }
}

/// Leaves of a JSON tree as `(dotted.path, text)` pairs in key order.
pub fn flatten(v: &Value) -> Vec<(String, String)> {
    fn walk(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
        let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(m) if !m.is_empty() => m.iter().for_each(|(k, x)| walk(&join(k), x, out)),
            Value::Array(a) if !a.is_empty() => a.iter().enumerate().for_each(|(i, x)| walk(&join(&i.to_string()), x, out)),
            Value::Object(_) => out.push((prefix.to_string(), "{}".into())),
            Value::Array(_) => out.push((prefix.to_string(), "[]".into())),
            leaf => out.push((prefix.to_string(), scalar(leaf))),
        }
    }
    let mut out = Vec::new();
    walk("", v, &mut out);
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let fields: Vec<String> = r.iter().map(|f| csv_field(f)).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

/// Left-aligned text table.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, f) in width.iter_mut().zip(r) {
            *w = (*w).max(f.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        padded.join("  ").trim_end().to_string() + "\n"
    };
    let mut s = line(header.to_vec());
    s.push_str(&line(width.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().iter().map(String::as_str).collect()));
    for r in rows {
        s.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn flatten_paths() {
        let v = json!({"b": [1, {"c": 0.5}], "a": "x", "e": []});
        assert_eq!(
            flatten(&v),
            vec![
                ("a".into(), "x".into()),
                ("b.0".into(), "1".into()),
                ("b.1.c".into(), "5.0000000000000000e-1".into()),
                ("e".into(), "[]".into()),
            ]
        );
    }

    #[test]
    fn csv_quotes() {
        assert_eq!(csv(&["k", "v"], &[vec!["a,b".into(), "q\"".into()]]), "k,v\n\"a,b\",\"q\"\"\"\n");
    }

    #[test]
    fn table_alignment() {
        let t = table(&["L", "gap"], &[vec!["10".into(), "1".into()]]);
        assert_eq!(t, "L   gap\n--  ---\n10  1\n");
    }
}
