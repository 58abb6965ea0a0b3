//! Deterministic report serialization.

use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().expect("formatted float parses")
}

/// JSON number, with non-finite values spelled as strings and `-0` as `0`.
pub fn num(x: f64) -> Value {
    if x.is_nan() {
        Value::String("nan".into())
    } else if x.is_infinite() {
        Value::String(if x > 0.0 { "inf" } else { "-inf" }.into())
    } else {
        let r = round_sig(x);
        serde_json::Number::from_f64(if r == 0.0 { 0.0 } else { r }).map_or(Value::Null, Value::Number)
    }
}

/// Number as written in CSV and text output.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        let r = round_sig(x);
        format!("{}", if r == 0.0 { 0.0 } else { r })
    }
}

/// Rounds every float in `v`. Keys are already sorted by `serde_json::Map`.
pub fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => num(n.as_f64().expect("f64")),
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

/// Serializable value as normalized JSON; non-finite floats must go through [`num`].
pub fn to_json<T: serde::Serialize>(value: &T) -> Value {
    normalize(serde_json::to_value(value).expect("report types serialize"))
}

pub fn render(report: &Value, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("json renders");
            s.push('\n');
            s
        }
        Format::Text => {
            let mut lines = Vec::new();
            flatten("", report, &mut lines);
            lines.into_iter().map(|l| l + "\n").collect()
        }
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<String>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(o) => o.iter().for_each(|(k, v)| flatten(&join(k), v, out)),
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            a.iter().enumerate().for_each(|(i, v)| flatten(&join(&i.to_string()), v, out))
        }
        Value::String(s) => out.push(format!("{prefix} = {s}")),
        other => out.push(format!("{prefix} = {other}")),
    }
}

/// Writes `text` to `path`, or to stdout without a path.
pub fn write_out(text: &str, path: Option<&Path>) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::validation(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::validation(format!("stdout: {e}")))
        }
    }
}

/// CSV table with a header row; cells are preformatted.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Report envelope: command name, metadata and result.
pub fn envelope(command: &str, meta: Map<String, Value>, result: Value) -> Value {
    let mut top = Map::new();
    top.insert("command".into(), Value::String(command.into()));
    top.insert("meta".into(), normalize(Value::Object(meta)));
    top.insert("result".into(), result);
    Value::Object(top)
}
